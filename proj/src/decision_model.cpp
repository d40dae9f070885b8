#include "knotmatch/decision_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "knotmatch/errors.hpp"

namespace knotmatch {

namespace {

double dot(std::span<const double> phi, const Eigen::VectorXd& theta) {
  double s = 0.0;
  for (std::size_t j = 0; j < phi.size(); ++j) s += phi[j] * theta[static_cast<Eigen::Index>(j)];
  return s;
}

void checkTheta(const Problem& problem, const Eigen::VectorXd& theta) {
  if (static_cast<std::size_t>(theta.size()) != problem.dimension()) {
    throw ContractViolation("theta has dimension " + std::to_string(theta.size()) +
                            ", features have " + std::to_string(problem.dimension()));
  }
}

std::vector<NodeIndex> sortedVisitOrder(const Problem& problem) {
  auto nodes = visitableNodes(problem.kind, problem.graph);
  const auto keys = problem.graph.sortKeys();
  if (!keys.empty()) {
    std::stable_sort(nodes.begin(), nodes.end(), [&](NodeIndex a, NodeIndex b) {
      return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)];
    });
  }
  return nodes;
}

}  // namespace

std::vector<double> decisionLogits(const Problem& problem, std::span<const Edge> candidates,
                                   NodeIndex v, const Eigen::VectorXd& theta) {
  checkTheta(problem, theta);
  const std::size_t dim = problem.dimension();
  std::array<double, kMaxFeatureDim> phi{};
  std::vector<double> logits;
  logits.reserve(candidates.size());
  for (const Edge& d : candidates) {
    problem.features->compute(d.with(v), std::span<double>(phi.data(), dim));
    logits.push_back(dot(std::span<const double>(phi.data(), dim), theta));
  }
  return logits;
}

double softmaxInPlace(std::span<double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& x : logits) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : logits) x /= total;
  return mx + std::log(total);
}

DecisionDistribution decisionDistribution(const Problem& problem, const DecisionState& state,
                                          NodeIndex v, const Eigen::VectorXd& theta) {
  DecisionDistribution out;
  out.candidates = decisionSet(problem.kind, problem.graph, state, v);
  if (out.candidates.size() == 1) {
    out.probabilities = {1.0};
    return out;
  }
  out.probabilities = decisionLogits(problem, out.candidates, v, theta);
  softmaxInPlace(out.probabilities);
  return out;
}

SampledDecision sampleDecision(const Problem& problem, const DecisionState& state, NodeIndex v,
                               const Eigen::VectorXd& theta, std::mt19937_64& rng) {
  auto dist = decisionDistribution(problem, state, v, theta);
  if (dist.candidates.size() == 1) return {dist.candidates.front(), 0.0};
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  std::size_t pick = dist.probabilities.size() - 1;
  for (std::size_t i = 0; i < dist.probabilities.size(); ++i) {
    acc += dist.probabilities[i];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  return {dist.candidates[pick], std::log(dist.probabilities[pick])};
}

SampledNode sampleNextNode(const Problem& problem, const DecisionState& state, VisitPolicy policy,
                           std::mt19937_64& rng) {
  if (policy == VisitPolicy::sortedByX) {
    for (NodeIndex v : sortedVisitOrder(problem)) {
      if (!state.isVisited(v)) return {v, 0.0};
    }
    throw ContractViolation("no unvisited node left");
  }
  std::vector<NodeIndex> open;
  for (NodeIndex v : visitableNodes(problem.kind, problem.graph)) {
    if (!state.isVisited(v)) open.push_back(v);
  }
  if (open.empty()) throw ContractViolation("no unvisited node left");
  std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
  return {open[pick(rng)], -std::log(static_cast<double>(open.size()))};
}

double visitOrderLogProbability(const Problem& problem, std::span<const NodeIndex> order,
                                VisitPolicy policy) {
  if (policy == VisitPolicy::sortedByX) {
    const auto sorted = sortedVisitOrder(problem);
    if (order.size() > sorted.size() || !std::equal(order.begin(), order.end(), sorted.begin())) {
      return -std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }
  const double total = static_cast<double>(numSteps(problem.kind, problem.graph));
  double lp = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) lp -= std::log(total - static_cast<double>(r));
  return lp;
}

double pathLogLikelihood(const Problem& problem, const DecisionState& state,
                         const Eigen::VectorXd& theta, VisitPolicy policy) {
  PathLikelihood lik(problem.dimension());
  lik.addPath(problem, state, 1.0, policy);
  return lik.value(theta);
}

Eigen::VectorXd pathGradient(const Problem& problem, const DecisionState& state,
                             const Eigen::VectorXd& theta, VisitPolicy policy) {
  PathLikelihood lik(problem.dimension());
  lik.addPath(problem, state, 1.0, policy);
  Eigen::VectorXd grad;
  lik.evaluate(theta, nullptr, &grad, nullptr);
  return grad;
}

// ---------------------------------------------------------------------------
// PathLikelihood

PathLikelihood::PathLikelihood(std::size_t dimension) : dim_(dimension) {
  if (dim_ == 0 || dim_ > kMaxFeatureDim) throw ContractViolation("unsupported feature dimension");
}

void PathLikelihood::addPath(const Problem& problem, const DecisionState& state, double weight,
                             VisitPolicy policy) {
  if (problem.dimension() != dim_) throw ContractViolation("path feature dimension mismatch");
  if (!isComplete(problem.kind, problem.graph, state)) {
    throw ContractViolation("path likelihood needs a complete path");
  }
  if (weight == 0.0) return;
  pathBegin_.push_back(steps_.size());
  if (keepAlive_.empty() || keepAlive_.back() != problem.features) keepAlive_.push_back(problem.features);

  const auto order = state.visitOrder();
  const auto decisions = state.decisions();
  DecisionState s(problem.graph.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const NodeIndex v = order[r];
    if (s.isVisited(v)) throw ContractViolation("visit order repeats a node");
    if (problem.kind == DecisionKind::bipartite && problem.graph.partition(v) != 0) {
      throw ContractViolation("bipartite model visits partition 0 only");
    }
    const auto options = decisionSet(problem.kind, problem.graph, s, v);
    const auto it = std::find(options.begin(), options.end(), decisions[r]);
    if (it == options.end()) {
      throw ContractViolation("decision " + decisions[r].toString() + " at step " +
                              std::to_string(r) + " is not in the decision set");
    }
    if (options.size() > 1) {
      Step step{problem.features.get(), static_cast<std::uint32_t>(candidates_.size()),
                static_cast<std::uint32_t>(options.size()),
                static_cast<std::uint32_t>(it - options.begin()), weight};
      for (const Edge& d : options) candidates_.push_back(d.with(v));
      steps_.push_back(step);
    }
    s = applyDecisionUnchecked(std::move(s), v, decisions[r]);
  }
  pathConstant_.push_back(visitOrderLogProbability(problem, order, policy));
  constant_ += weight * pathConstant_.back();
  ++numPaths_;
}

double PathLikelihood::value(const Eigen::VectorXd& theta) const {
  double v = 0.0;
  evaluate(theta, &v, nullptr, nullptr);
  return v;
}

std::vector<double> PathLikelihood::pathValues(const Eigen::VectorXd& theta) const {
  if (static_cast<std::size_t>(theta.size()) != dim_) throw ContractViolation("theta dimension mismatch");
  std::vector<double> out(pathConstant_);
  std::vector<double> logits;
  std::array<double, kMaxFeatureDim> phi{};
  std::size_t path = 0;
  for (std::size_t k = 0; k < steps_.size(); ++k) {
    while (path + 1 < pathBegin_.size() && pathBegin_[path + 1] <= k) ++path;
    const Step& step = steps_[k];
    logits.resize(step.count);
    for (std::uint32_t i = 0; i < step.count; ++i) {
      std::span<double> row(phi.data(), dim_);
      step.features->compute(candidates_[step.firstCandidate + i], row);
      logits[i] = dot(row, theta);
    }
    const double chosen = logits[step.chosen];
    out[path] += chosen - softmaxInPlace(logits);
  }
  return out;
}

void PathLikelihood::evaluate(const Eigen::VectorXd& theta, double* value,
                              Eigen::VectorXd* gradient, Eigen::MatrixXd* hessian) const {
  if (static_cast<std::size_t>(theta.size()) != dim_) throw ContractViolation("theta dimension mismatch");
  const auto d = static_cast<Eigen::Index>(dim_);
  double total = constant_;
  if (gradient) gradient->setZero(d);
  if (hessian) hessian->setZero(d, d);

  std::vector<double> phi;
  std::vector<double> prob;
  std::array<double, kMaxFeatureDim> mean{};
  for (const Step& step : steps_) {
    phi.resize(static_cast<std::size_t>(step.count) * dim_);
    prob.resize(step.count);
    for (std::uint32_t i = 0; i < step.count; ++i) {
      std::span<double> row(phi.data() + i * dim_, dim_);
      step.features->compute(candidates_[step.firstCandidate + i], row);
      prob[i] = dot(row, theta);
    }
    const double chosenLogit = prob[step.chosen];
    const double logNorm = softmaxInPlace(prob);
    total += step.weight * (chosenLogit - logNorm);
    if (!gradient && !hessian) continue;

    mean.fill(0.0);
    for (std::uint32_t i = 0; i < step.count; ++i) {
      for (std::size_t j = 0; j < dim_; ++j) mean[j] += prob[i] * phi[i * dim_ + j];
    }
    if (gradient) {
      const double* chosen = phi.data() + step.chosen * dim_;
      for (std::size_t j = 0; j < dim_; ++j) {
        (*gradient)[static_cast<Eigen::Index>(j)] += step.weight * (chosen[j] - mean[j]);
      }
    }
    if (hessian) {
      // -w * Cov_p(phi)
      for (std::uint32_t i = 0; i < step.count; ++i) {
        const double wp = step.weight * prob[i];
        if (wp == 0.0) continue;
        for (std::size_t a = 0; a < dim_; ++a) {
          const double da = phi[i * dim_ + a] - mean[a];
          for (std::size_t b = 0; b <= a; ++b) {
            (*hessian)(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) -=
                wp * da * (phi[i * dim_ + b] - mean[b]);
          }
        }
      }
    }
  }
  if (hessian) {
    Eigen::MatrixXd full = hessian->selfadjointView<Eigen::Lower>();
    *hessian = std::move(full);
  }
  if (value) *value = total;
}

}  // namespace knotmatch
