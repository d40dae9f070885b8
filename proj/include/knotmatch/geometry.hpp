#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "knotmatch/features.hpp"
#include "knotmatch/graph.hpp"

namespace knotmatch {

// Board surfaces double as hypergraph partitions.
//   0: wide,   z = 0          2: wide,   z = height
//   1: narrow, y = 0          3: narrow, y = width
inline constexpr int kNumSurfaces = 4;
inline constexpr bool isWideSurface(int surface) { return surface % 2 == 0; }

struct BoardDims {
  double length = 5000.0;  // x
  double width = 300.0;    // y
  double height = 150.0;   // z

  bool operator==(const BoardDims&) const = default;
};

// One detected ellipse on a board surface. a and b are full axis lengths,
// alpha the rotation of the a-axis within the surface plane.
struct KnotFace {
  int partition = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double a = 1.0;
  double b = 1.0;
  double alpha = 0.0;
  std::optional<int> label;

  double area() const;
  bool operator==(const KnotFace&) const = default;
};

double distance(const KnotFace& u, const KnotFace& v);

struct Board {
  std::string id;
  BoardDims dims;
  std::vector<KnotFace> faces;

  bool isAnnotated() const;
  // Faces sharing a label form one edge. Throws DataError when a face is
  // unlabeled or a label repeats a surface.
  Matching groundTruth() const;
  HyperGraph graph() const;

  bool operator==(const Board&) const = default;
};

// Throws DataError on faces off their surface plane, outside the board, or
// with non-positive axes.
void validateBoard(const Board& board, double tolerance = 1e-6);

// Covariate layout:
//   [0] pair distance, both faces wide
//   [1] pair distance, at least one face narrow
//   [2] pair |area_u - area_v|
//   [3] triplet max pairwise distance
//   [4] triplet min pairwise distance
//   [5] triplet |area(closest two) - area(remaining)|
inline constexpr std::size_t kCovariateDim = 6;
inline constexpr int kCovariateLayoutVersion = 1;
using CovariateVector = std::array<double, kCovariateDim>;

enum class EdgeKind { singleton, pairWide, pairNarrow, triple };

// Slots populated for each kind; the rest stay zero.
std::span<const std::size_t> activeSlots(EdgeKind kind);

EdgeKind edgeKindOf(std::span<const int> partitions);

// Throws ContractViolation when u and v share a surface.
CovariateVector pairCovariates(const KnotFace& u, const KnotFace& v);
// Throws ContractViolation unless the three faces lie on distinct surfaces.
CovariateVector tripletCovariates(const KnotFace& u, const KnotFace& v, const KnotFace& w);
// Dispatch on |edge|: singleton -> zeros, pair, triplet. Indices into faces.
CovariateVector edgeCovariates(std::span<const KnotFace> faces, const Edge& edge);
EdgeKind edgeKindOf(std::span<const KnotFace> faces, const Edge& edge);

// Per-slot affine map (x - shift) / scale applied to the slots a kind
// populates. Inactive slots stay zero so singletons remain the baseline.
class Standardization {
 public:
  Standardization();
  Standardization(CovariateVector shift, CovariateVector scale);

  // Population mean and standard deviation per slot over the samples in which
  // the slot is active. Slots with zero spread (or no samples) keep shift 0,
  // scale 1.
  static Standardization fit(std::span<const std::pair<EdgeKind, CovariateVector>> samples);

  CovariateVector apply(const CovariateVector& raw, EdgeKind kind) const;
  CovariateVector invert(const CovariateVector& standardized, EdgeKind kind) const;

  const CovariateVector& shift() const { return shift_; }
  const CovariateVector& scale() const { return scale_; }

  bool operator==(const Standardization&) const = default;

 private:
  CovariateVector shift_;
  CovariateVector scale_;
};

// Fits on the covariates of every ground-truth edge of size >= 2.
Standardization fitStandardization(std::span<const Board> boards);

// Standardized covariates over a fixed face list. Pair covariates are
// precomputed; triplets are evaluated on demand.
class BoardFeatures final : public EdgeFeatures {
 public:
  BoardFeatures(std::vector<KnotFace> faces, Standardization standardization);

  std::size_t dimension() const override { return kCovariateDim; }
  void compute(const Edge& edge, std::span<double> out) const override;

  const std::vector<KnotFace>& faces() const { return faces_; }

 private:
  std::vector<KnotFace> faces_;
  Standardization standardization_;
  std::vector<CovariateVector> pairs_;  // n x n, upper triangle used
};

}  // namespace knotmatch
