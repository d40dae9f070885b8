#include "knotmatch/features.hpp"

#include <cmath>
#include <utility>

#include "knotmatch/errors.hpp"

namespace knotmatch {

NodeDifferenceFeatures::NodeDifferenceFeatures(std::size_t dimension,
                                               std::vector<double> nodeCovariates)
    : dim_(dimension), covariates_(std::move(nodeCovariates)) {
  if (dim_ == 0 || dim_ > kMaxFeatureDim) throw ContractViolation("unsupported feature dimension");
  if (covariates_.size() % dim_ != 0) throw ContractViolation("covariate table is ragged");
}

void NodeDifferenceFeatures::compute(const Edge& edge, std::span<double> out) const {
  if (edge.size() == 1) {
    for (std::size_t j = 0; j < dim_; ++j) out[j] = 0.0;
    return;
  }
  if (edge.size() != 2) throw ContractViolation("node-difference features defined for pairs only");
  const auto a = node(edge[0]);
  const auto b = node(edge[1]);
  for (std::size_t j = 0; j < dim_; ++j) out[j] = std::abs(a[j] - b[j]);
}

}  // namespace knotmatch
