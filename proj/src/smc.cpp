#include "knotmatch/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_set>

#include "knotmatch/errors.hpp"
#include "knotmatch/parallel.hpp"

namespace knotmatch {

namespace {

struct LabelHash {
  std::size_t operator()(const std::vector<NodeIndex>& labels) const {
    std::size_t h = 1469598103934665603ull;
    for (NodeIndex x : labels) {
      h ^= static_cast<std::size_t>(x + 1);
      h *= 1099511628211ull;
    }
    return h;
  }
};

std::size_t countUnique(const std::vector<Particle>& particles) {
  std::unordered_set<std::vector<NodeIndex>, LabelHash> seen;
  for (const auto& p : particles) seen.insert(p.state.matchingLabels());
  return seen.size();
}

}  // namespace

// ---------------------------------------------------------------------------
// Posterior

MatchingPosterior MatchingPosterior::aggregate(std::span<const Matching> matchings,
                                               std::span<const double> weights) {
  if (matchings.size() != weights.size()) throw ContractViolation("one weight per matching required");
  std::map<Matching, Entry> merged;
  double total = 0.0;
  for (std::size_t i = 0; i < matchings.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw ContractViolation("posterior weights must be non-negative");
    auto& e = merged[matchings[i]];
    e.weight += weights[i];
    ++e.count;
    total += weights[i];
  }
  if (!matchings.empty() && !(total > 0.0)) throw NumericalError("posterior has zero total weight");
  MatchingPosterior out;
  for (auto& [m, e] : merged) {
    e.matching = m;
    e.weight /= total;
    out.entries_.push_back(std::move(e));
  }
  std::stable_sort(out.entries_.begin(), out.entries_.end(),
                   [](const Entry& a, const Entry& b) { return a.weight > b.weight; });
  return out;
}

double MatchingPosterior::probability(const Matching& m) const {
  for (const auto& e : entries_) {
    if (e.matching == m) return e.weight;
  }
  return 0.0;
}

std::size_t MatchingPosterior::numParticles() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.count;
  return n;
}

Matching mapMatching(const MatchingPosterior& posterior) {
  if (posterior.empty()) throw ContractViolation("MAP of an empty posterior");
  const auto& entries = posterior.entries();
  const MatchingPosterior::Entry* best = &entries.front();
  for (const auto& e : entries) {
    if (e.weight > best->weight || (e.weight == best->weight && e.matching < best->matching)) best = &e;
  }
  return best->matching;
}

// ---------------------------------------------------------------------------
// Parent counting

int parentCount(const HyperGraph& graph, const DecisionState& state, DecisionKind kind) {
  if (state.numVisited() == 0) throw ContractViolation("the initial state has no parent");
  if (kind == DecisionKind::bipartite) {
    (void)graph;
    // A singleton means the other side was exhausted; undoing a pair would
    // free a node the singleton ignored, so only singletons can be undone.
    const auto& edges = state.edges();
    const auto singletons = std::count_if(edges.begin(), edges.end(), [](const Edge& e) { return e.size() == 1; });
    return singletons > 0 ? static_cast<int>(singletons) : static_cast<int>(state.numVisited());
  }
  const auto& edges = state.edges();
  const bool singleton =
      std::any_of(edges.begin(), edges.end(), [](const Edge& e) { return e.size() == 1; });
  int total = 0;
  for (const Edge& e : edges) {
    int visited = 0;
    for (NodeIndex v : e) visited += state.isVisited(v) ? 1 : 0;
    const int size = static_cast<int>(e.size());
    if (visited < size - 1 || (size == 1 && visited == 0)) {
      throw ContractViolation("edge " + e.toString() + " cannot arise with " +
                              std::to_string(visited) + " visited members");
    }
    switch (size) {
      case 1: total += 1; break;
      case 2: total += visited == 2 ? 2 : (singleton ? 0 : 1); break;
      case 3: total += visited == 3 ? (singleton ? 3 : 6) : (singleton ? 0 : 2); break;
      default: throw ContractViolation("edge larger than the knot model allows");
    }
  }
  if (total == 0) throw ContractViolation("state has zero possible parents");
  return total;
}

// ---------------------------------------------------------------------------
// Sampler

Particle propose(const Problem& problem, Particle particle, const Eigen::VectorXd& theta,
                 VisitPolicy policy, bool overcountingCorrection, std::mt19937_64& rng) {
  if (overcountingCorrection && policy != VisitPolicy::uniformRandom) {
    throw UsageError("overcounting correction requires the uniform visit policy");
  }
  const auto node = sampleNextNode(problem, particle.state, policy, rng);
  const auto decision = sampleDecision(problem, particle.state, node.node, theta, rng);
  particle.state = applyDecisionUnchecked(std::move(particle.state), node.node, decision.decision);
  if (overcountingCorrection) {
    particle.logWeight -= std::log(static_cast<double>(parentCount(problem.graph, particle.state, problem.kind)));
  }
  return particle;
}

std::vector<double> normalizedWeights(std::span<const double> logWeights) {
  std::vector<double> w(logWeights.begin(), logWeights.end());
  if (w.empty()) return w;
  const double mx = *std::max_element(w.begin(), w.end());
  if (!std::isfinite(mx)) throw NumericalError("all particle weights are zero (degenerate population)");
  double total = 0.0;
  for (double& x : w) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

double effectiveSampleSize(std::span<const double> normalized) {
  double sq = 0.0;
  for (double w : normalized) sq += w * w;
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

std::vector<std::size_t> resampleIndices(std::span<const double> normalized, std::size_t count,
                                         ResamplingScheme scheme, std::mt19937_64& rng) {
  std::vector<std::size_t> out(count);
  if (count == 0 || normalized.empty()) return out;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t last = normalized.size() - 1;
  if (scheme == ResamplingScheme::systematic) {
    const double step = 1.0 / static_cast<double>(count);
    double u = unif(rng) * step;
    double cumulative = normalized[0];
    std::size_t j = 0;
    for (std::size_t i = 0; i < count; ++i) {
      while (u > cumulative && j < last) cumulative += normalized[++j];
      out[i] = j;
      u += step;
    }
    return out;
  }
  std::vector<double> cdf(normalized.size());
  std::partial_sum(normalized.begin(), normalized.end(), cdf.begin());
  for (auto& idx : out) {
    const double u = unif(rng) * cdf.back();
    idx = std::min<std::size_t>(static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()), last);
  }
  return out;
}

std::vector<std::mt19937_64> makeLaneStreams(std::uint64_t seed, std::size_t lanes, std::uint64_t salt) {
  std::vector<std::mt19937_64> streams;
  streams.reserve(lanes);
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(lane), static_cast<std::uint32_t>(salt),
                      static_cast<std::uint32_t>(salt >> 32), 0x6b6e6f74u};
    streams.emplace_back(seq);
  }
  return streams;
}

SmcResult runSmc(const Problem& problem, const Eigen::VectorXd& theta, const SmcConfig& config,
                 VisitPolicy policy) {
  if (config.numParticles == 0) throw UsageError("SMC needs at least one particle");
  if (!(config.essThresholdFraction > 0.0 && config.essThresholdFraction <= 1.0)) {
    throw UsageError("ESS threshold fraction must lie in (0, 1]");
  }
  if (config.overcountingCorrection && policy != VisitPolicy::uniformRandom) {
    throw UsageError("overcounting correction requires the uniform visit policy");
  }
  if (static_cast<std::size_t>(theta.size()) != problem.dimension()) {
    throw ContractViolation("theta dimension does not match the features");
  }

  const std::size_t n = config.numParticles;
  const std::size_t lanes = std::max<std::size_t>(1, std::min(config.lanes, n));
  const std::size_t threads = config.threads ? config.threads : defaultThreadCount();
  auto streams = makeLaneStreams(config.seed, lanes);
  std::mt19937_64 master(config.seed ^ 0x9e3779b97f4a7c15ull);

  SmcResult result;
  result.particles.assign(n, Particle{DecisionState(problem.graph.size()), 0.0});
  const std::size_t steps = numSteps(problem.kind, problem.graph);
  std::vector<double> logW(n, 0.0);
  for (std::size_t r = 0; r < steps; ++r) {
    parallelFor(lanes, threads, [&](std::size_t lane) {
      for (std::size_t i = lane; i < n; i += lanes) {
        result.particles[i] = propose(problem, std::move(result.particles[i]), theta, policy,
                                      config.overcountingCorrection, streams[lane]);
      }
    });
    for (std::size_t i = 0; i < n; ++i) logW[i] = result.particles[i].logWeight;
    const auto w = normalizedWeights(logW);
    const double ess = effectiveSampleSize(w);
    result.diagnostics.ess.push_back(ess);
    result.diagnostics.uniqueMatchings.push_back(countUnique(result.particles));
    const bool resample = ess < config.essThresholdFraction * static_cast<double>(n);
    result.diagnostics.resampled.push_back(resample);
    if (resample) {
      const auto idx = resampleIndices(w, n, config.resampling, master);
      std::vector<Particle> next;
      next.reserve(n);
      for (std::size_t i : idx) next.push_back(Particle{result.particles[i].state, 0.0});
      result.particles = std::move(next);
    }
  }

  for (std::size_t i = 0; i < n; ++i) logW[i] = result.particles[i].logWeight;
  result.weights = normalizedWeights(logW);
  std::vector<Matching> matchings;
  matchings.reserve(n);
  for (const auto& p : result.particles) matchings.push_back(p.state.matching());
  result.posterior = MatchingPosterior::aggregate(matchings, result.weights);
  return result;
}

// ---------------------------------------------------------------------------
// Segmentation

std::vector<std::vector<NodeIndex>> segmentBoard(const Board& board, double threshold) {
  if (!(threshold > 0.0)) throw UsageError("segmentation threshold must be positive");
  const std::size_t n = board.faces.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distance(board.faces[i], board.faces[j]) <= threshold) {
        const auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  std::map<std::size_t, std::vector<NodeIndex>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[find(i)].push_back(static_cast<NodeIndex>(i));
  std::vector<std::vector<NodeIndex>> out;
  for (auto& [root, members] : clusters) out.push_back(std::move(members));
  return out;
}

}  // namespace knotmatch
