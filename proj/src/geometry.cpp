#include "knotmatch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "knotmatch/errors.hpp"

namespace knotmatch {

double KnotFace::area() const { return std::numbers::pi * a * b; }

double distance(const KnotFace& u, const KnotFace& v) {
  return std::hypot(u.x - v.x, u.y - v.y, u.z - v.z);
}

bool Board::isAnnotated() const {
  return std::all_of(faces.begin(), faces.end(), [](const KnotFace& f) { return f.label.has_value(); });
}

Matching Board::groundTruth() const {
  std::map<int, std::vector<NodeIndex>> groups;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    if (!faces[i].label) {
      throw DataError("board " + id + ": face " + std::to_string(i) + " has no label");
    }
    groups[*faces[i].label].push_back(static_cast<NodeIndex>(i));
  }
  std::vector<Edge> edges;
  for (const auto& [label, members] : groups) {
    if (members.size() > kMaxEdgeSize) {
      throw DataError("board " + id + ": label " + std::to_string(label) + " spans " +
                      std::to_string(members.size()) + " faces");
    }
    edges.emplace_back(std::span<const NodeIndex>(members));
  }
  Matching truth(std::move(edges));
  try {
    validateMatching(graph(), truth);
  } catch (const ContractViolation& e) {
    throw DataError("board " + id + ": " + e.what());
  }
  return truth;
}

HyperGraph Board::graph() const {
  std::vector<int> parts;
  std::vector<double> keys;
  parts.reserve(faces.size());
  for (const auto& f : faces) {
    parts.push_back(f.partition);
    keys.push_back(f.x);
  }
  HyperGraph g(kNumSurfaces, std::move(parts));
  g.setSortKeys(std::move(keys));
  return g;
}

void validateBoard(const Board& board, double tolerance) {
  const auto& d = board.dims;
  if (!(d.length > 0 && d.width > 0 && d.height > 0)) {
    throw DataError("board " + board.id + ": non-positive dimensions");
  }
  for (std::size_t i = 0; i < board.faces.size(); ++i) {
    const auto& f = board.faces[i];
    const std::string where = "board " + board.id + ", face " + std::to_string(i) + ": ";
    if (f.partition < 0 || f.partition >= kNumSurfaces) throw DataError(where + "bad surface index");
    if (!(f.a > 0 && f.b > 0)) throw DataError(where + "axes must be positive");
    if (!std::isfinite(f.x) || !std::isfinite(f.y) || !std::isfinite(f.z) || !std::isfinite(f.alpha)) {
      throw DataError(where + "non-finite coordinate");
    }
    const bool inside = f.x >= -tolerance && f.x <= d.length + tolerance && f.y >= -tolerance &&
                        f.y <= d.width + tolerance && f.z >= -tolerance &&
                        f.z <= d.height + tolerance;
    if (!inside) throw DataError(where + "center outside the board");
    double offPlane = 0.0;
    switch (f.partition) {
      case 0: offPlane = f.z; break;
      case 1: offPlane = f.y; break;
      case 2: offPlane = f.z - d.height; break;
      default: offPlane = f.y - d.width; break;
    }
    if (std::abs(offPlane) > tolerance) throw DataError(where + "center not on its surface plane");
  }
}

// ---------------------------------------------------------------------------
// Covariates

namespace {

constexpr std::array<std::size_t, 0> kNoSlots{};
constexpr std::array<std::size_t, 2> kPairWideSlots{0, 2};
constexpr std::array<std::size_t, 2> kPairNarrowSlots{1, 2};
constexpr std::array<std::size_t, 3> kTripleSlots{3, 4, 5};

}  // namespace

std::span<const std::size_t> activeSlots(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::singleton: return kNoSlots;
    case EdgeKind::pairWide: return kPairWideSlots;
    case EdgeKind::pairNarrow: return kPairNarrowSlots;
    case EdgeKind::triple: return kTripleSlots;
  }
  return kNoSlots;
}

EdgeKind edgeKindOf(std::span<const int> partitions) {
  switch (partitions.size()) {
    case 1: return EdgeKind::singleton;
    case 2:
      return isWideSurface(partitions[0]) && isWideSurface(partitions[1]) ? EdgeKind::pairWide
                                                                          : EdgeKind::pairNarrow;
    case 3: return EdgeKind::triple;
    default: throw ContractViolation("covariates defined for 1 to 3 faces");
  }
}

EdgeKind edgeKindOf(std::span<const KnotFace> faces, const Edge& edge) {
  std::array<int, kMaxEdgeSize> parts{};
  for (std::size_t i = 0; i < edge.size(); ++i) parts[i] = faces[static_cast<std::size_t>(edge[i])].partition;
  return edgeKindOf(std::span<const int>(parts.data(), edge.size()));
}

CovariateVector pairCovariates(const KnotFace& u, const KnotFace& v) {
  if (u.partition == v.partition) throw ContractViolation("pair covariates need distinct surfaces");
  CovariateVector out{};
  const bool bothWide = isWideSurface(u.partition) && isWideSurface(v.partition);
  out[bothWide ? 0 : 1] = distance(u, v);
  out[2] = std::abs(u.area() - v.area());
  return out;
}

CovariateVector tripletCovariates(const KnotFace& u, const KnotFace& v, const KnotFace& w) {
  if (u.partition == v.partition || u.partition == w.partition || v.partition == w.partition) {
    throw ContractViolation("triplet covariates need three distinct surfaces");
  }
  const std::array<const KnotFace*, 3> f{&u, &v, &w};
  // Pair i excludes face i.
  const std::array<double, 3> d{distance(v, w), distance(u, w), distance(u, v)};
  const auto closest = static_cast<std::size_t>(std::min_element(d.begin(), d.end()) - d.begin());
  CovariateVector out{};
  out[3] = *std::max_element(d.begin(), d.end());
  out[4] = d[closest];
  double pairArea = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    if (i != closest) pairArea += f[i]->area();
  }
  out[5] = std::abs(pairArea - f[closest]->area());
  return out;
}

CovariateVector edgeCovariates(std::span<const KnotFace> faces, const Edge& edge) {
  auto face = [&](std::size_t i) -> const KnotFace& {
    return faces[static_cast<std::size_t>(edge[i])];
  };
  switch (edge.size()) {
    case 1: return CovariateVector{};
    case 2: return pairCovariates(face(0), face(1));
    case 3: return tripletCovariates(face(0), face(1), face(2));
    default: throw ContractViolation("covariates defined for 1 to 3 faces");
  }
}

// ---------------------------------------------------------------------------
// Standardization

Standardization::Standardization() {
  shift_.fill(0.0);
  scale_.fill(1.0);
}

Standardization::Standardization(CovariateVector shift, CovariateVector scale)
    : shift_(shift), scale_(scale) {
  for (double s : scale_) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ContractViolation("standardization scale must be positive");
  }
}

Standardization Standardization::fit(std::span<const std::pair<EdgeKind, CovariateVector>> samples) {
  CovariateVector sum{}, sumSq{};
  std::array<std::size_t, kCovariateDim> count{};
  for (const auto& [kind, x] : samples) {
    for (std::size_t j : activeSlots(kind)) {
      sum[j] += x[j];
      ++count[j];
    }
  }
  CovariateVector mean{};
  for (std::size_t j = 0; j < kCovariateDim; ++j) {
    if (count[j]) mean[j] = sum[j] / static_cast<double>(count[j]);
  }
  for (const auto& [kind, x] : samples) {
    for (std::size_t j : activeSlots(kind)) sumSq[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
  }
  Standardization out;
  for (std::size_t j = 0; j < kCovariateDim; ++j) {
    if (count[j] == 0) continue;
    const double sd = std::sqrt(sumSq[j] / static_cast<double>(count[j]));
    if (sd > 1e-12 * std::max(1.0, std::abs(mean[j]))) {
      out.shift_[j] = mean[j];
      out.scale_[j] = sd;
    }
  }
  return out;
}

CovariateVector Standardization::apply(const CovariateVector& raw, EdgeKind kind) const {
  CovariateVector out{};
  for (std::size_t j : activeSlots(kind)) out[j] = (raw[j] - shift_[j]) / scale_[j];
  return out;
}

CovariateVector Standardization::invert(const CovariateVector& standardized, EdgeKind kind) const {
  CovariateVector out{};
  for (std::size_t j : activeSlots(kind)) out[j] = standardized[j] * scale_[j] + shift_[j];
  return out;
}

Standardization fitStandardization(std::span<const Board> boards) {
  std::vector<std::pair<EdgeKind, CovariateVector>> samples;
  for (const Board& board : boards) {
    const Matching truth = board.groundTruth();
    for (const Edge& e : truth.edges()) {
      if (e.size() < 2) continue;
      samples.emplace_back(edgeKindOf(board.faces, e), edgeCovariates(board.faces, e));
    }
  }
  return Standardization::fit(samples);
}

// ---------------------------------------------------------------------------
// BoardFeatures

BoardFeatures::BoardFeatures(std::vector<KnotFace> faces, Standardization standardization)
    : faces_(std::move(faces)), standardization_(standardization) {
  const std::size_t n = faces_.size();
  pairs_.assign(n * n, CovariateVector{});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (faces_[i].partition == faces_[j].partition) continue;
      const Edge e{static_cast<NodeIndex>(i), static_cast<NodeIndex>(j)};
      pairs_[i * n + j] =
          standardization_.apply(pairCovariates(faces_[i], faces_[j]), edgeKindOf(faces_, e));
    }
  }
}

void BoardFeatures::compute(const Edge& edge, std::span<double> out) const {
  CovariateVector phi{};
  if (edge.size() == 2) {
    phi = pairs_[static_cast<std::size_t>(edge[0]) * faces_.size() + static_cast<std::size_t>(edge[1])];
  } else if (edge.size() == 3) {
    phi = standardization_.apply(edgeCovariates(faces_, edge), EdgeKind::triple);
  } else if (edge.size() != 1) {
    throw ContractViolation("covariates defined for 1 to 3 faces");
  }
  std::copy(phi.begin(), phi.end(), out.begin());
}

}  // namespace knotmatch
