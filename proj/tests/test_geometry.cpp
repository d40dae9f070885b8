#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "knotmatch/errors.hpp"
#include "knotmatch/geometry.hpp"

using namespace knotmatch;

namespace {

KnotFace face(int p, double x, double y, double z, double a = 1.0, double b = 1.0) {
  KnotFace f;
  f.partition = p;
  f.x = x;
  f.y = y;
  f.z = z;
  f.a = a;
  f.b = b;
  return f;
}

// Axes with pi * a * b equal to the requested area.
KnotFace faceWithArea(int p, double x, double area) { return face(p, x, 0.0, 0.0, area / std::numbers::pi, 1.0); }

}  // namespace

TEST_CASE("pair covariates on two wide faces") {
  const auto c = pairCovariates(face(0, 0, 0, 0), face(2, 3, 4, 0));
  CHECK(c[0] == doctest::Approx(5.0));
  CHECK(c[1] == 0.0);
  CHECK(c[2] == 0.0);
  CHECK(c[3] == 0.0);
}

TEST_CASE("pair covariates with a narrow face use the narrow slot") {
  const auto c = pairCovariates(face(0, 0, 0, 0), face(1, 3, 4, 0));
  CHECK(c[0] == 0.0);
  CHECK(c[1] == doctest::Approx(5.0));
}

TEST_CASE("equal ellipse areas give zero area difference") {
  const auto c = pairCovariates(face(0, 0, 0, 0, 2, 3), face(2, 1, 0, 0, 1, 6));
  CHECK(c[2] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(pairCovariates(face(0, 0, 0, 0), face(0, 1, 0, 0)), ContractViolation);
}

TEST_CASE("triplet covariates on collinear faces") {
  const auto c = tripletCovariates(face(0, 0, 0, 0), face(1, 1, 0, 0), face(2, 10, 0, 0));
  CHECK(c[3] == doctest::Approx(10.0));
  CHECK(c[4] == doctest::Approx(1.0));
  CHECK(c[0] == 0.0);
  CHECK(c[1] == 0.0);
  CHECK(c[2] == 0.0);
}

TEST_CASE("triplet area split is zero when the closest pair sums to the third") {
  const auto c = tripletCovariates(faceWithArea(0, 0, 3), faceWithArea(1, 1, 4), faceWithArea(2, 10, 7));
  CHECK(c[5] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("equilateral triplet has equal max and min distance") {
  const double h = std::sqrt(3.0) / 2.0;
  const auto c = tripletCovariates(face(0, 0, 0, 0), face(1, 1, 0, 0), face(2, 0.5, h, 0));
  CHECK(c[3] == doctest::Approx(c[4]));
}

TEST_CASE("edge covariates dispatch by size and match the direct functions") {
  const std::vector<KnotFace> faces{face(0, 0, 0, 0), face(1, 2, 0, 0, 2, 1), face(3, 7, 1, 0, 1, 3)};
  CHECK(edgeCovariates(faces, Edge{1}) == CovariateVector{});
  CHECK(edgeCovariates(faces, Edge{0, 1}) == pairCovariates(faces[0], faces[1]));
  CHECK(edgeCovariates(faces, Edge{0, 1, 2}) == tripletCovariates(faces[0], faces[1], faces[2]));
  CHECK(edgeKindOf(faces, Edge{0, 1}) == EdgeKind::pairNarrow);
  CHECK(edgeKindOf(faces, Edge{0, 1, 2}) == EdgeKind::triple);
}

TEST_CASE("covariates are symmetric, translation invariant and nonnegative") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int t = 0; t < 200; ++t) {
    const auto f0 = face(0, u(rng), u(rng), u(rng), 1 + std::abs(u(rng)), 1 + std::abs(u(rng)));
    const auto f1 = face(1, u(rng), u(rng), u(rng), 1 + std::abs(u(rng)), 1 + std::abs(u(rng)));
    const auto f2 = face(2, u(rng), u(rng), u(rng), 1 + std::abs(u(rng)), 1 + std::abs(u(rng)));
    const double dx = u(rng), dy = u(rng), dz = u(rng);
    auto shift = [&](KnotFace f) {
      f.x += dx;
      f.y += dy;
      f.z += dz;
      return f;
    };
    const auto p = pairCovariates(f0, f1);
    const auto q = pairCovariates(shift(f1), shift(f0));
    const auto a = tripletCovariates(f0, f1, f2);
    const auto b = tripletCovariates(shift(f2), shift(f0), shift(f1));
    for (std::size_t j = 0; j < kCovariateDim; ++j) {
      CHECK(p[j] == doctest::Approx(q[j]));
      CHECK(a[j] == doctest::Approx(b[j]));
      CHECK(p[j] >= 0.0);
      CHECK(a[j] >= 0.0);
    }
  }
}

TEST_CASE("standardization maps a two-point slot to minus one and one") {
  std::vector<std::pair<EdgeKind, CovariateVector>> samples{
      {EdgeKind::pairWide, CovariateVector{0, 0, 5, 0, 0, 0}},
      {EdgeKind::pairWide, CovariateVector{2, 0, 5, 0, 0, 0}},
  };
  const auto s = Standardization::fit(samples);
  CHECK(s.apply(samples[0].second, EdgeKind::pairWide)[0] == doctest::Approx(-1.0));
  CHECK(s.apply(samples[1].second, EdgeKind::pairWide)[0] == doctest::Approx(1.0));
  // Constant slot keeps its values.
  CHECK(s.apply(samples[0].second, EdgeKind::pairWide)[2] == doctest::Approx(5.0));
  // Inactive slots stay zero.
  const auto single = s.apply(CovariateVector{}, EdgeKind::singleton);
  for (double x : single) CHECK(x == 0.0);
}

TEST_CASE("standardization round trip") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(10, 3);
  std::vector<std::pair<EdgeKind, CovariateVector>> samples;
  for (int i = 0; i < 50; ++i) {
    samples.push_back({EdgeKind::pairNarrow, CovariateVector{0, n(rng), n(rng), 0, 0, 0}});
    samples.push_back({EdgeKind::triple, CovariateVector{0, 0, 0, n(rng), n(rng), n(rng)}});
  }
  const auto s = Standardization::fit(samples);
  for (const auto& [kind, x] : samples) {
    const auto back = s.invert(s.apply(x, kind), kind);
    for (std::size_t j = 0; j < kCovariateDim; ++j) CHECK(std::abs(back[j] - x[j]) < 1e-12 * (1 + std::abs(x[j])));
  }
  CHECK_THROWS_AS(Standardization(CovariateVector{}, CovariateVector{1, 1, 0, 1, 1, 1}), ContractViolation);
}

TEST_CASE("board features equal standardized edge covariates") {
  const std::vector<KnotFace> faces{face(0, 0, 0, 0), face(1, 2, 0, 0, 2, 1), face(3, 7, 1, 0, 1, 3)};
  const Standardization s(CovariateVector{1, 2, 3, 4, 5, 6}, CovariateVector{2, 2, 2, 2, 2, 2});
  const BoardFeatures bf(faces, s);
  for (const Edge& e : {Edge{0}, Edge{0, 1}, Edge{0, 2}, Edge{1, 2}, Edge{0, 1, 2}}) {
    std::vector<double> out(kCovariateDim);
    bf.compute(e, out);
    const auto want = s.apply(edgeCovariates(faces, e), edgeKindOf(faces, e));
    for (std::size_t j = 0; j < kCovariateDim; ++j) CHECK(out[j] == doctest::Approx(want[j]));
  }
}

TEST_CASE("board validation and ground truth") {
  Board b;
  b.id = "b";
  b.faces = {face(0, 10, 10, 0), face(2, 12, 10, b.dims.height)};
  b.faces[0].label = 1;
  b.faces[1].label = 1;
  CHECK_NOTHROW(validateBoard(b));
  CHECK(b.groundTruth() == Matching({Edge{0, 1}}));
  auto off = b;
  off.faces[0].z = 3;
  CHECK_THROWS_AS(validateBoard(off), DataError);
  auto outside = b;
  outside.faces[0].x = -5;
  CHECK_THROWS_AS(validateBoard(outside), DataError);
  auto flat = b;
  flat.faces[0].a = 0;
  CHECK_THROWS_AS(validateBoard(flat), DataError);
  auto clash = b;
  clash.faces[1] = face(0, 30, 10, 0);
  clash.faces[1].label = 1;
  CHECK_THROWS_AS(clash.groundTruth(), DataError);
  auto unlabeled = b;
  unlabeled.faces[1].label.reset();
  CHECK_FALSE(unlabeled.isAnnotated());
  CHECK_THROWS_AS(unlabeled.groundTruth(), DataError);
}
