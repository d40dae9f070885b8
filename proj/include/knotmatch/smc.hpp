#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "knotmatch/decision_model.hpp"
#include "knotmatch/geometry.hpp"
#include "knotmatch/graph.hpp"

namespace knotmatch {

struct Particle {
  DecisionState state;
  double logWeight = 0.0;  // -inf marks a dead particle
};

enum class ResamplingScheme { systematic, multinomial };

struct SmcConfig {
  std::size_t numParticles = 1000;
  double essThresholdFraction = 0.5;
  std::uint64_t seed = 1;
  ResamplingScheme resampling = ResamplingScheme::systematic;
  // Backward-kernel weighting by 1 / parentCount.
  bool overcountingCorrection = true;
  // Particle n draws from RNG stream n % lanes; results depend on
  // (seed, numParticles, lanes) only, never on the thread count.
  std::size_t lanes = 16;
  std::size_t threads = 0;  // 0: hardware concurrency
};

// Matchings aggregated over a weighted particle population, sorted by
// decreasing weight (ties: lexicographic matching order).
class MatchingPosterior {
 public:
  struct Entry {
    Matching matching;
    double weight = 0.0;
    std::size_t count = 0;  // particles carrying this matching
  };

  MatchingPosterior() = default;
  // Weights need not be normalized; they are rescaled to sum to 1.
  static MatchingPosterior aggregate(std::span<const Matching> matchings,
                                     std::span<const double> weights);

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  double probability(const Matching& m) const;
  std::size_t numParticles() const;

 private:
  std::vector<Entry> entries_;
};

struct SmcDiagnostics {
  std::vector<double> ess;                   // per iteration, before resampling
  std::vector<std::size_t> uniqueMatchings;  // per iteration
  std::vector<bool> resampled;
};

struct SmcResult {
  MatchingPosterior posterior;
  SmcDiagnostics diagnostics;
  std::vector<Particle> particles;  // final population
  std::vector<double> weights;      // normalized final weights
};

// Number of distinct predecessor states (partial matching, visited set) from
// which one proposal step reaches `state` under the uniform visit policy.
// Knot model, per edge:
//   no singleton in state:  2-edge: 2 visited -> 2, 1 visited -> 1
//                           3-edge: 3 visited -> 6, 2 visited -> 2
//   some singleton present: 1-edge -> 1
//                           2-edge: 2 visited -> 2, 1 visited -> 0
//                           3-edge: 3 visited -> 3, 2 visited -> 0
// Bipartite model: the number of singletons if any, else the number of
// visited nodes.
// Throws ContractViolation for states no proposal sequence can produce.
int parentCount(const HyperGraph& graph, const DecisionState& state, DecisionKind kind);

// One SMC move: next node by policy, decision by the local model, then the
// weight update log(1 / parentCount) when correcting, 0 otherwise.
Particle propose(const Problem& problem, Particle particle, const Eigen::VectorXd& theta,
                 VisitPolicy policy, bool overcountingCorrection, std::mt19937_64& rng);

SmcResult runSmc(const Problem& problem, const Eigen::VectorXd& theta, const SmcConfig& config,
                 VisitPolicy policy = VisitPolicy::uniformRandom);

// Highest-weight matching; ties broken by lexicographic edge order.
Matching mapMatching(const MatchingPosterior& posterior);

// Single-linkage clusters of faces whose 3-D distance is <= threshold.
// Clusters and their members are sorted by face index.
std::vector<std::vector<NodeIndex>> segmentBoard(const Board& board, double threshold);

inline constexpr double kDefaultSegmentThreshold = 500.0;

// Population utilities shared with the E-step sampler.
std::vector<double> normalizedWeights(std::span<const double> logWeights);
double effectiveSampleSize(std::span<const double> normalized);
std::vector<std::size_t> resampleIndices(std::span<const double> normalized, std::size_t count,
                                         ResamplingScheme scheme, std::mt19937_64& rng);
std::vector<std::mt19937_64> makeLaneStreams(std::uint64_t seed, std::size_t lanes,
                                             std::uint64_t salt = 0);

}  // namespace knotmatch
