#include "knotmatch/board_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "knotmatch/errors.hpp"

namespace knotmatch {

namespace {

struct Plane {
  Eigen::Vector3d origin;
  Eigen::Vector3d e1;
  Eigen::Vector3d e2;
  double extent1;
  double extent2;
};

Plane surfacePlane(int surface, const BoardDims& d) {
  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d ey = Eigen::Vector3d::UnitY();
  const Eigen::Vector3d ez = Eigen::Vector3d::UnitZ();
  switch (surface) {
    case 0: return {Eigen::Vector3d(0, 0, 0), ex, ey, d.length, d.width};
    case 1: return {Eigen::Vector3d(0, 0, 0), ex, ez, d.length, d.height};
    case 2: return {Eigen::Vector3d(0, 0, d.height), ex, ey, d.length, d.width};
    case 3: return {Eigen::Vector3d(0, d.width, 0), ex, ez, d.length, d.height};
    default: throw ContractViolation("surface index out of range");
  }
}

Eigen::Matrix3d rotation(double thetaX, double thetaY) {
  return (Eigen::AngleAxisd(thetaY, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(thetaX, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Segment farthestPair(const std::vector<KnotFace>& faces) {
  Segment s;
  double best = -1.0;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    for (std::size_t j = i; j < faces.size(); ++j) {
      const double d = distance(faces[i], faces[j]);
      if (d > best) {
        best = d;
        s.p = {faces[i].x, faces[i].y, faces[i].z};
        s.q = {faces[j].x, faces[j].y, faces[j].z};
      }
    }
  }
  return s;
}

}  // namespace

Eigen::Vector3d ConeSpec::apex(const BoardDims& dims) const {
  return {xt, yt, (orientation == 1 ? dims.height : 0.0) + zt};
}

Eigen::Vector3d ConeSpec::axis() const {
  const Eigen::Vector3d up(0.0, 0.0, orientation == 1 ? -1.0 : 1.0);
  return rotation(thetaX, thetaY) * up;
}

Eigen::Matrix3d ConeSpec::quadric() const {
  const Eigen::Vector3d a = axis();
  return Eigen::Matrix3d::Identity() - (1.0 + slope * slope) * a * a.transpose();
}

ConeSpec sampleCone(std::mt19937_64& rng, const SimConfig& config) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  constexpr double kMaxTilt = std::numbers::pi / 6.0;
  ConeSpec c;
  c.slope = uniform(0.025, 0.05);
  c.orientation = unit(rng) < 0.5 ? 1 : 0;
  c.thetaX = uniform(-kMaxTilt, kMaxTilt);
  c.thetaY = uniform(-kMaxTilt, kMaxTilt);
  c.xt = uniform(0.0, config.dims.length);
  c.yt = uniform(0.0, config.dims.width);
  c.zt = (2.0 * c.orientation - 1.0) * uniform(0.0, 500.0);
  return c;
}

std::optional<KnotFace> conicSection(const ConeSpec& cone, int surface, const BoardDims& dims) {
  const Plane plane = surfacePlane(surface, dims);
  const Eigen::Vector3d apex = cone.apex(dims);
  const Eigen::Matrix3d m = cone.quadric();
  Eigen::Matrix<double, 3, 2> e;
  e.col(0) = plane.e1;
  e.col(1) = plane.e2;
  // q(xi) = xi' B xi + 2 xi' b + c, xi = in-plane coordinates of P.
  const Eigen::Vector3d w = plane.origin - apex;
  const Eigen::Matrix2d bq = e.transpose() * m * e;
  const Eigen::Vector2d bl = e.transpose() * m * w;
  const double c = w.dot(m * w);

  const double det = bq.determinant();
  const double scale = bq.cwiseAbs().maxCoeff();
  if (!(std::abs(det) > 1e-12 * scale * scale) || det <= 0.0) return std::nullopt;
  const Eigen::Vector2d center = -bq.ldlt().solve(bl);
  const double k = -(c + bl.dot(center));  // (xi - center)' B (xi - center) = k
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(bq);
  const Eigen::Vector2d lambda = eig.eigenvalues();
  if (!(k / lambda[0] > 0.0) || !(k / lambda[1] > 0.0)) return std::nullopt;
  if (!(center[0] >= 0.0 && center[0] <= plane.extent1 && center[1] >= 0.0 &&
        center[1] <= plane.extent2)) {
    return std::nullopt;
  }
  const Eigen::Vector3d p = plane.origin + e * center;
  if (!((p - apex).dot(cone.axis()) > 0.0)) return std::nullopt;

  // Smaller eigenvalue: longer axis.
  const double major = 2.0 * std::sqrt(k / lambda[0]);
  const double minor = 2.0 * std::sqrt(k / lambda[1]);
  const Eigen::Vector2d dir = eig.eigenvectors().col(0);
  double alpha = std::atan2(dir[1], dir[0]);
  if (alpha < 0.0) alpha += std::numbers::pi;
  if (alpha >= std::numbers::pi) alpha -= std::numbers::pi;

  KnotFace f;
  f.partition = surface;
  f.x = p.x();
  f.y = p.y();
  f.z = p.z();
  f.a = major;
  f.b = minor;
  f.alpha = alpha;
  return f;
}

double segmentDistance(const Segment& s1, const Segment& s2) {
  // Closest points on p1 + s d1, p2 + t d2 with s, t in [0, 1].
  const Eigen::Vector3d d1 = s1.q - s1.p;
  const Eigen::Vector3d d2 = s2.q - s2.p;
  const Eigen::Vector3d r = s1.p - s2.p;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  constexpr double kTiny = 1e-15;
  double s = 0.0;
  double t = 0.0;
  if (a <= kTiny && e <= kTiny) return r.norm();
  if (a <= kTiny) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kTiny) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kTiny * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((s1.p + s * d1) - (s2.p + t * d2)).norm();
}

SimulatedBoard generateBoard(const SimConfig& config, std::mt19937_64& rng, std::string id) {
  if (!(config.rho > 0.0)) throw UsageError("knot rate rho must be positive");
  if (!(config.separation >= 0.0)) throw UsageError("separation floor must be non-negative");
  SimulatedBoard out;
  out.board.id = std::move(id);
  out.board.dims = config.dims;
  const int numKnots = std::poisson_distribution<int>(config.rho)(rng);
  for (int i = 0; i < numKnots; ++i) {
    std::size_t attempts = 0;
    while (true) {
      if (++attempts > config.maxAttempts) {
        throw DataError("branch " + std::to_string(i) + " of board '" + out.board.id +
                        "' rejected " + std::to_string(config.maxAttempts) +
                        " times; the configuration is too crowded");
      }
      BranchRecord branch;
      branch.cone = sampleCone(rng, config);
      for (int j = 0; j < kNumSurfaces; ++j) {
        if (auto face = conicSection(branch.cone, j, config.dims)) branch.faces.push_back(*face);
      }
      if (branch.faces.empty()) continue;
      if (config.reject4Faces && branch.faces.size() > kMaxEdgeSize) continue;
      branch.axisSegment = farthestPair(branch.faces);
      const bool tooClose = std::any_of(out.branches.begin(), out.branches.end(), [&](const BranchRecord& b) {
        return segmentDistance(branch.axisSegment, b.axisSegment) < config.separation;
      });
      if (tooClose) continue;
      for (auto& f : branch.faces) f.label = i;
      out.branches.push_back(std::move(branch));
      break;
    }
  }
  for (const auto& b : out.branches) {
    out.board.faces.insert(out.board.faces.end(), b.faces.begin(), b.faces.end());
  }
  std::stable_sort(out.board.faces.begin(), out.board.faces.end(),
                   [](const KnotFace& u, const KnotFace& v) { return u.x < v.x; });
  if (out.board.faces.size() > 0) out.truth = out.board.groundTruth();
  return out;
}

std::vector<SimulatedBoard> generateBoards(const SimConfig& config, std::size_t count) {
  std::vector<SimulatedBoard> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32), 0x626f6172u};
    std::mt19937_64 rng(seq);
    out.push_back(generateBoard(config, rng, "board-" + std::to_string(k)));
  }
  return out;
}

}  // namespace knotmatch
