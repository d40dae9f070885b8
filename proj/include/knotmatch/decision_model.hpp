#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "knotmatch/features.hpp"
#include "knotmatch/geometry.hpp"
#include "knotmatch/graph.hpp"

namespace knotmatch {

// How the next node is chosen. uniformRandom draws uniformly among unvisited
// visitable nodes; sortedByX visits in increasing sort key (ties by index).
enum class VisitPolicy { uniformRandom, sortedByX };

// A graph together with its decision model and covariate map.
struct Problem {
  HyperGraph graph;
  DecisionKind kind = DecisionKind::knot;
  std::shared_ptr<const EdgeFeatures> features;

  std::size_t dimension() const { return features->dimension(); }
};

struct ModelParams {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(kCovariateDim);
  double lambda = 1.0;
  Standardization standardization;
};

// Linear predictors theta' phi(d ∪ {v}) for each candidate d.
std::vector<double> decisionLogits(const Problem& problem, std::span<const Edge> candidates,
                                   NodeIndex v, const Eigen::VectorXd& theta);

// Softmax with max subtraction. Returns the log normalizer.
double softmaxInPlace(std::span<double> logits);

struct DecisionDistribution {
  std::vector<Edge> candidates;
  std::vector<double> probabilities;
};

DecisionDistribution decisionDistribution(const Problem& problem, const DecisionState& state,
                                          NodeIndex v, const Eigen::VectorXd& theta);

struct SampledDecision {
  Edge decision;
  double logProbability = 0.0;
};

SampledDecision sampleDecision(const Problem& problem, const DecisionState& state, NodeIndex v,
                               const Eigen::VectorXd& theta, std::mt19937_64& rng);

// Next node under the policy, and the log-probability of choosing it.
struct SampledNode {
  NodeIndex node = -1;
  double logProbability = 0.0;
};
SampledNode sampleNextNode(const Problem& problem, const DecisionState& state, VisitPolicy policy,
                           std::mt19937_64& rng);

// log p(sigma) of a complete or partial visit order. Uniform policy:
// -sum_r log(R - r + 1). Sorted policy: 0 if the order is the sorted prefix,
// -inf otherwise.
double visitOrderLogProbability(const Problem& problem, std::span<const NodeIndex> order,
                                VisitPolicy policy);

// log p(sigma, d | theta) of a complete path. Throws ContractViolation on an
// incomplete path or a decision outside its decision set.
double pathLogLikelihood(const Problem& problem, const DecisionState& state,
                         const Eigen::VectorXd& theta, VisitPolicy policy);

// d/dtheta of pathLogLikelihood.
Eigen::VectorXd pathGradient(const Problem& problem, const DecisionState& state,
                             const Eigen::VectorXd& theta, VisitPolicy policy);

// Weighted sum of path log-likelihoods, compiled once so that value, gradient
// and Hessian can be re-evaluated cheaply at many theta. Problems must
// outlive the object only through the shared feature maps it retains.
class PathLikelihood {
 public:
  explicit PathLikelihood(std::size_t dimension);

  std::size_t dimension() const { return dim_; }
  std::size_t numPaths() const { return numPaths_; }

  void addPath(const Problem& problem, const DecisionState& state, double weight,
               VisitPolicy policy);

  double value(const Eigen::VectorXd& theta) const;

  // Unweighted log-likelihood of each added path, in insertion order.
  std::vector<double> pathValues(const Eigen::VectorXd& theta) const;

  // Any output pointer may be null.
  void evaluate(const Eigen::VectorXd& theta, double* value, Eigen::VectorXd* gradient,
                Eigen::MatrixXd* hessian) const;

 private:
  struct Step {
    const EdgeFeatures* features;
    std::uint32_t firstCandidate;
    std::uint32_t count;
    std::uint32_t chosen;
    double weight;
  };

  std::size_t dim_;
  std::size_t numPaths_ = 0;
  double constant_ = 0.0;
  std::vector<std::shared_ptr<const EdgeFeatures>> keepAlive_;
  std::vector<Edge> candidates_;
  std::vector<Step> steps_;
  std::vector<std::size_t> pathBegin_;  // first step of each path
  std::vector<double> pathConstant_;    // visit-order term of each path
};

}  // namespace knotmatch
