#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "knotmatch/graph.hpp"

namespace knotmatch {

// Upper bound on covariate dimension; lets hot loops use stack buffers.
inline constexpr std::size_t kMaxFeatureDim = 16;

// Covariate map phi(e) for a candidate edge e = d ∪ {v}. Implementations must
// be thread-safe for concurrent const calls.
class EdgeFeatures {
 public:
  virtual ~EdgeFeatures() = default;
  virtual std::size_t dimension() const = 0;
  // Writes phi(edge) into out[0..dimension()).
  virtual void compute(const Edge& edge, std::span<double> out) const = 0;
};

// phi({u, v}) = |f_u - f_v| component-wise from per-node covariates f.
// Singletons map to zero; larger edges are not supported.
class NodeDifferenceFeatures final : public EdgeFeatures {
 public:
  // nodeCovariates is row-major, numNodes x dimension.
  NodeDifferenceFeatures(std::size_t dimension, std::vector<double> nodeCovariates);

  std::size_t dimension() const override { return dim_; }
  void compute(const Edge& edge, std::span<double> out) const override;

  std::span<const double> node(NodeIndex v) const {
    return {covariates_.data() + static_cast<std::size_t>(v) * dim_, dim_};
  }

 private:
  std::size_t dim_;
  std::vector<double> covariates_;
};

}  // namespace knotmatch
