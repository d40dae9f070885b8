#include "knotmatch/mcem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>

#include "knotmatch/errors.hpp"
#include "knotmatch/features.hpp"
#include "knotmatch/parallel.hpp"

namespace knotmatch {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool isSubset(const Edge& small, const Edge& big) {
  return std::all_of(small.begin(), small.end(), [&](NodeIndex v) { return big.contains(v); });
}

// Whether v has anything other than the empty decision available.
bool hasCandidate(const Problem& problem, const DecisionState& state, NodeIndex v) {
  const auto& graph = problem.graph;
  const int own = graph.partition(v);
  for (std::size_t u = 0; u < graph.size(); ++u) {
    const auto ui = static_cast<NodeIndex>(u);
    if (ui != v && !state.isCovered(ui) && graph.partition(ui) != own) return true;
  }
  if (problem.kind == DecisionKind::bipartite) return false;
  return std::any_of(state.edges().begin(), state.edges().end(), [&](const Edge& e) {
    return e.size() == 2 && graph.partition(e[0]) != own && graph.partition(e[1]) != own;
  });
}

class LatentStepper {
 public:
  LatentStepper(const TrainingInstance& instance, const Eigen::VectorXd& theta,
                const EStepConfig& config)
      : instance_(instance), theta_(theta), config_(config),
        nodes_(visitableNodes(instance.problem.kind, instance.problem.graph)),
        truth_(instance.problem.graph.size()) {
    for (const Edge& e : instance.truth.edges()) {
      for (NodeIndex v : e) truth_[static_cast<std::size_t>(v)] = e;
    }
    if (config.policy == VisitPolicy::sortedByX) {
      const auto keys = instance.problem.graph.sortKeys();
      if (!keys.empty()) {
        std::stable_sort(nodes_.begin(), nodes_.end(), [&](NodeIndex a, NodeIndex b) {
          return keys[static_cast<std::size_t>(a)] < keys[static_cast<std::size_t>(b)];
        });
      }
    }
  }

  // Advances one particle by one visit; returns the log incremental weight.
  double step(DecisionState& state, std::mt19937_64& rng) const {
    return config_.scheme == EStepScheme::constrained ? constrained(state, rng)
                                                      : indicator(state, rng);
  }

 private:
  bool consistent(const DecisionState& state, NodeIndex v, const Edge& d) const {
    const Edge& truth = truth_[static_cast<std::size_t>(v)];
    if (d.empty()) return state.isCovered(v) || truth.size() == 1;
    return isSubset(d.with(v), truth);
  }

  bool viable(const DecisionState& state, NodeIndex v) const {
    if (state.isCovered(v)) return true;
    if (truth_[static_cast<std::size_t>(v)].size() > 1) return true;
    return !hasCandidate(instance_.problem, state, v);
  }

  double constrained(DecisionState& state, std::mt19937_64& rng) const {
    NodeIndex v = -1;
    double logNode = 0.0;
    if (config_.policy == VisitPolicy::sortedByX) {
      v = nodes_[state.numVisited()];
      if (!viable(state, v)) return kNegInf;
    } else {
      std::vector<NodeIndex> open;
      std::size_t unvisited = 0;
      for (NodeIndex u : nodes_) {
        if (state.isVisited(u)) continue;
        ++unvisited;
        if (viable(state, u)) open.push_back(u);
      }
      if (open.empty()) return kNegInf;
      v = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
      logNode = std::log(static_cast<double>(open.size()) / static_cast<double>(unvisited));
    }
    const auto dist = decisionDistribution(instance_.problem, state, v, theta_);
    double mass = 0.0;
    std::vector<double> cumulative(dist.candidates.size());
    for (std::size_t j = 0; j < dist.candidates.size(); ++j) {
      if (consistent(state, v, dist.candidates[j])) mass += dist.probabilities[j];
      cumulative[j] = mass;
    }
    if (!(mass > 0.0)) {
      // A viable node with no consistent mass only happens through underflow.
      return kNegInf;
    }
    const double u = std::uniform_real_distribution<double>(0.0, mass)(rng);
    std::size_t pick = dist.candidates.size();
    for (std::size_t j = 0; j < dist.candidates.size(); ++j) {
      if (u < cumulative[j] && consistent(state, v, dist.candidates[j])) {
        pick = j;
        break;
      }
    }
    if (pick == dist.candidates.size()) {
      for (std::size_t j = dist.candidates.size(); j-- > 0;) {
        if (consistent(state, v, dist.candidates[j])) {
          pick = j;
          break;
        }
      }
    }
    state = applyDecisionUnchecked(std::move(state), v, dist.candidates[pick]);
    return logNode + std::log(mass);
  }

  double indicator(DecisionState& state, std::mt19937_64& rng) const {
    NodeIndex v = -1;
    if (config_.policy == VisitPolicy::sortedByX) {
      v = nodes_[state.numVisited()];
    } else {
      v = sampleNextNode(instance_.problem, state, VisitPolicy::uniformRandom, rng).node;
    }
    const auto d = sampleDecision(instance_.problem, state, v, theta_, rng).decision;
    const bool ok = consistent(state, v, d);
    state = applyDecisionUnchecked(std::move(state), v, d);
    return ok ? 0.0 : kNegInf;
  }

  const TrainingInstance& instance_;
  const Eigen::VectorXd& theta_;
  const EStepConfig& config_;
  std::vector<NodeIndex> nodes_;
  std::vector<Edge> truth_;
};

PathLikelihood compile(const TrainingInstance& instance, const LatentSample& sample,
                       VisitPolicy policy) {
  PathLikelihood lik(instance.problem.dimension());
  for (std::size_t n = 0; n < sample.paths.size(); ++n) {
    if (sample.paths[n].matching() != instance.truth) {
      throw ContractViolation("latent path of instance '" + instance.id +
                              "' does not end in the observed matching");
    }
    lik.addPath(instance.problem, sample.paths[n], sample.weights[n], policy);
  }
  return lik;
}

std::vector<PathLikelihood> compileAll(std::span<const TrainingInstance> instances,
                                       std::span<const LatentSample> samples, VisitPolicy policy) {
  if (instances.size() != samples.size()) throw ContractViolation("one latent sample per instance");
  std::vector<PathLikelihood> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) out.push_back(compile(instances[i], samples[i], policy));
  return out;
}

QEstimate qFromCompiled(const std::vector<PathLikelihood>& liks,
                        std::span<const LatentSample> samples, const Eigen::VectorXd& theta,
                        double lambda) {
  QEstimate q;
  double variance = 0.0;
  for (std::size_t i = 0; i < liks.size(); ++i) {
    const auto values = liks[i].pathValues(theta);
    std::vector<double> w;  // zero-weight paths were never compiled
    for (double x : samples[i].weights) {
      if (x != 0.0) w.push_back(x);
    }
    double mean = 0.0;
    for (std::size_t n = 0; n < values.size(); ++n) mean += w[n] * values[n];
    double var = 0.0;
    for (std::size_t n = 0; n < values.size(); ++n) var += w[n] * (values[n] - mean) * (values[n] - mean);
    q.value += mean;
    if (samples[i].numDraws > 0) variance += var / static_cast<double>(samples[i].numDraws);
  }
  q.value -= lambda * theta.squaredNorm();
  q.standardError = std::sqrt(variance);
  return q;
}

struct Objective {
  const std::vector<PathLikelihood>& liks;
  std::span<const TrainingInstance> instances;
  double lambda;
  Eigen::Index dim;

  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd* grad, Eigen::MatrixXd* hess) const {
    double total = -lambda * theta.squaredNorm();
    if (grad) *grad = -2.0 * lambda * theta;
    if (hess) *hess = -2.0 * lambda * Eigen::MatrixXd::Identity(dim, dim);
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    for (std::size_t i = 0; i < liks.size(); ++i) {
      double v = 0.0;
      liks[i].evaluate(theta, &v, grad ? &g : nullptr, hess ? &h : nullptr);
      if (!std::isfinite(v)) {
        throw NumericalError("non-finite objective on instance '" + instances[i].id + "'");
      }
      total += v;
      if (grad) *grad += g;
      if (hess) *hess += h;
    }
    return total;
  }
};

MStepResult mStepCompiled(const std::vector<PathLikelihood>& liks,
                          std::span<const TrainingInstance> instances,
                          const Eigen::VectorXd& thetaInit, double lambda,
                          const MStepOptions& options) {
  if (!(lambda >= 0.0)) throw UsageError("lambda must be non-negative");
  const Eigen::Index dim = thetaInit.size();
  for (const auto& lik : liks) {
    if (static_cast<Eigen::Index>(lik.dimension()) != dim) throw ContractViolation("theta dimension mismatch");
  }
  Objective objective{liks, instances, lambda, dim};
  MStepResult out;
  out.theta = thetaInit;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  double f = objective.evaluate(out.theta, &grad, &hess);
  for (; out.iterations < options.maxIterations; ++out.iterations) {
    if (grad.norm() < options.gradientTolerance) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd step;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = ldlt.solve(grad);
    if (step.size() != dim || !step.allFinite() || step.dot(grad) <= 0.0) step = grad;
    const double slope = step.dot(grad);
    // The predicted gain is below the objective's rounding; the gradient is at its noise floor.
    if (slope < 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f))) {
      out.converged = true;
      break;
    }
    double t = 1.0;
    double fNext = f;
    Eigen::VectorXd next;
    while (t > 1e-12) {
      next = out.theta + t * step;
      fNext = objective.evaluate(next, nullptr, nullptr);
      if (fNext >= f + 1e-4 * t * slope) break;
      t *= 0.5;
    }
    if (t <= 1e-12) break;  // no ascent left at double precision
    out.theta = std::move(next);
    f = objective.evaluate(out.theta, &grad, &hess);
  }
  out.objective = f;
  out.gradientNorm = grad.norm();
  if (out.gradientNorm < options.gradientTolerance) out.converged = true;
  return out;
}

}  // namespace

void validateInstance(const TrainingInstance& instance) {
  const auto& p = instance.problem;
  if (!p.features) throw DataError("instance '" + instance.id + "' has no covariates");
  if (!isReachableMatching(p.kind, p.graph, instance.truth)) {
    throw DataError("observed matching of instance '" + instance.id +
                    "' cannot be produced by the decision model");
  }
}

LatentSample sampleLatentPaths(const TrainingInstance& instance, const Eigen::VectorXd& theta,
                               const EStepConfig& config) {
  if (config.numParticles == 0) throw UsageError("E-step needs at least one particle");
  const auto& problem = instance.problem;
  if (static_cast<std::size_t>(theta.size()) != problem.dimension()) {
    throw ContractViolation("theta dimension does not match the features");
  }
  const std::size_t n = config.numParticles;
  const std::size_t lanes = std::max<std::size_t>(1, std::min(config.lanes, n));
  const std::size_t threads = config.threads ? config.threads : defaultThreadCount();
  auto streams = makeLaneStreams(config.seed, lanes, 0x65737465ull);
  std::mt19937_64 master(deriveSeed(config.seed, 0));
  const LatentStepper stepper(instance, theta, config);

  std::vector<DecisionState> states(n, DecisionState(problem.graph.size()));
  std::vector<double> logW(n, 0.0);
  std::vector<double> w;
  const std::size_t steps = numSteps(problem.kind, problem.graph);
  for (std::size_t r = 0; r < steps; ++r) {
    parallelFor(lanes, threads, [&](std::size_t lane) {
      for (std::size_t i = lane; i < n; i += lanes) {
        if (logW[i] == kNegInf) continue;
        logW[i] += stepper.step(states[i], streams[lane]);
      }
    });
    try {
      w = normalizedWeights(logW);
    } catch (const NumericalError&) {
      throw NumericalError("no sampled path of instance '" + instance.id +
                           "' is consistent with its observed matching");
    }
    if (r + 1 < steps && effectiveSampleSize(w) < config.essThresholdFraction * static_cast<double>(n)) {
      const auto idx = resampleIndices(w, n, ResamplingScheme::systematic, master);
      std::vector<DecisionState> next;
      next.reserve(n);
      for (std::size_t i : idx) next.push_back(states[i]);
      states = std::move(next);
      std::fill(logW.begin(), logW.end(), 0.0);
    }
  }
  if (steps == 0) w.assign(n, 1.0 / static_cast<double>(n));

  // Identical paths (also those duplicated by earlier resampling) are merged.
  using PathKey = std::pair<std::vector<NodeIndex>, std::vector<Edge>>;
  std::map<PathKey, std::pair<std::size_t, std::size_t>> counts;  // key -> (state index, count)
  for (std::size_t i : resampleIndices(w, n, ResamplingScheme::systematic, master)) {
    PathKey key{{states[i].visitOrder().begin(), states[i].visitOrder().end()},
                {states[i].decisions().begin(), states[i].decisions().end()}};
    auto [it, fresh] = counts.try_emplace(std::move(key), i, 0);
    ++it->second.second;
  }
  LatentSample out;
  out.numDraws = n;
  for (const auto& [key, entry] : counts) {
    out.paths.push_back(states[entry.first]);
    out.weights.push_back(static_cast<double>(entry.second) / static_cast<double>(n));
  }
  return out;
}

QEstimate approximateQ(std::span<const TrainingInstance> instances,
                       std::span<const LatentSample> samples, const Eigen::VectorXd& theta,
                       double lambda) {
  const auto liks = compileAll(instances, samples, VisitPolicy::uniformRandom);
  return qFromCompiled(liks, samples, theta, lambda);
}

MStepResult mStep(std::span<const TrainingInstance> instances,
                  std::span<const LatentSample> samples, const Eigen::VectorXd& thetaInit,
                  double lambda, const MStepOptions& options) {
  const auto liks = compileAll(instances, samples, VisitPolicy::uniformRandom);
  return mStepCompiled(liks, instances, thetaInit, lambda, options);
}

std::size_t McemConfig::sampleSizeAt(std::size_t iteration) const {
  if (schedule.empty()) throw UsageError("E-step schedule is empty");
  return schedule[std::min(iteration, schedule.size() - 1)];
}

McemResult runMcem(std::span<const TrainingInstance> instances, std::size_t dimension,
                   const McemConfig& config, const McemCallback& onIteration) {
  if (config.schedule.empty() ||
      std::any_of(config.schedule.begin(), config.schedule.end(), [](std::size_t n) { return n == 0; })) {
    throw UsageError("E-step schedule must be nonempty with positive entries");
  }
  if (!(config.lambda >= 0.0)) throw UsageError("lambda must be non-negative");
  for (const auto& inst : instances) {
    validateInstance(inst);
    if (inst.problem.dimension() != dimension) {
      throw DataError("instance '" + inst.id + "' has covariate dimension " +
                      std::to_string(inst.problem.dimension()));
    }
  }

  McemResult result;
  result.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension));
  if (instances.empty()) {
    result.converged = true;
    return result;
  }
  std::size_t calm = 0;
  for (std::size_t t = 0; t < config.maxIterations; ++t) {
    EStepConfig e;
    e.numParticles = config.sampleSizeAt(t);
    e.scheme = config.scheme;
    e.policy = config.policy;
    e.lanes = config.lanes;
    e.threads = config.threads;
    std::vector<LatentSample> samples(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
      e.seed = deriveSeed(deriveSeed(config.seed, t + 1), i);
      samples[i] = sampleLatentPaths(instances[i], result.theta, e);
    }
    const auto liks = compileAll(instances, samples, config.policy);
    const auto m = mStepCompiled(liks, instances, result.theta, config.lambda, config.mStep);
    const auto q = qFromCompiled(liks, samples, m.theta, config.lambda);

    McemIteration it;
    it.iteration = t + 1;
    it.sampleSize = e.numParticles;
    it.theta = m.theta;
    it.q = q.value;
    it.qStandardError = q.standardError;
    it.mStepIterations = m.iterations;
    if (!result.trace.empty()) {
      calm = std::abs(q.value - result.trace.back().q) < 2.0 * q.standardError ? calm + 1 : 0;
    }
    result.theta = m.theta;
    result.trace.push_back(it);
    if (onIteration) onIteration(it);
    if (config.stopPatience > 0 && calm >= config.stopPatience) {
      result.converged = true;
      break;
    }
  }
  return result;
}

SyntheticSet generateSyntheticGraphs(std::size_t numInstances, std::size_t nodesPerPartition,
                                     std::size_t dimension, double tau, double zeta,
                                     std::mt19937_64& rng) {
  if (numInstances == 0) throw UsageError("need at least one synthetic instance");
  if (nodesPerPartition == 0) throw UsageError("need at least one node per partition");
  if (dimension == 0 || dimension > kMaxFeatureDim) throw UsageError("unsupported covariate dimension");
  if (!(tau >= 0.0) || !(zeta >= 0.0)) throw UsageError("tau and zeta must be non-negative");

  SyntheticSet out;
  std::normal_distribution<double> normal(0.0, 1.0);
  out.thetaTrue.resize(static_cast<Eigen::Index>(dimension));
  for (Eigen::Index j = 0; j < out.thetaTrue.size(); ++j) out.thetaTrue[j] = tau * normal(rng);

  std::vector<int> partitionOf(2 * nodesPerPartition, 0);
  std::fill(partitionOf.begin() + static_cast<std::ptrdiff_t>(nodesPerPartition), partitionOf.end(), 1);
  for (std::size_t i = 0; i < numInstances; ++i) {
    std::vector<double> f(partitionOf.size() * dimension);
    for (double& x : f) x = zeta * normal(rng);
    TrainingInstance inst;
    inst.id = "synthetic-" + std::to_string(i);
    inst.problem.graph = HyperGraph(2, partitionOf);
    inst.problem.kind = DecisionKind::bipartite;
    inst.problem.features = std::make_shared<NodeDifferenceFeatures>(dimension, std::move(f));
    DecisionState s(partitionOf.size());
    for (std::size_t r = 0; r < nodesPerPartition; ++r) {
      const auto v = sampleNextNode(inst.problem, s, VisitPolicy::uniformRandom, rng).node;
      const auto d = sampleDecision(inst.problem, s, v, out.thetaTrue, rng).decision;
      s = applyDecisionUnchecked(std::move(s), v, d);
    }
    inst.truth = s.matching();
    out.instances.push_back(std::move(inst));
    out.paths.push_back(std::move(s));
  }
  return out;
}

}  // namespace knotmatch
