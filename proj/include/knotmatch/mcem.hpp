#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "knotmatch/decision_model.hpp"
#include "knotmatch/graph.hpp"
#include "knotmatch/smc.hpp"

namespace knotmatch {

// One observed matching together with the graph and covariates it lives on.
struct TrainingInstance {
  std::string id;
  Problem problem;
  Matching truth;
};

// Throws DataError unless the truth is a matching the model can produce.
void validateInstance(const TrainingInstance& instance);

// How the E-step draws paths consistent with the observed matching.
//  constrained: nodes drawn among those with a consistent decision, decisions
//               from the renormalized consistent subset; never kills particles.
//  indicator:   unconstrained model proposal weighted by the consistency
//               indicator; particles die on the first inconsistent decision.
enum class EStepScheme { constrained, indicator };

struct EStepConfig {
  std::size_t numParticles = 100;
  double essThresholdFraction = 0.5;
  std::uint64_t seed = 1;
  EStepScheme scheme = EStepScheme::constrained;
  VisitPolicy policy = VisitPolicy::uniformRandom;
  std::size_t lanes = 16;
  std::size_t threads = 0;
};

// Complete paths ending in the observed matching, with normalized weights.
// Duplicated paths are merged, so weights are multiplicities / numDraws.
struct LatentSample {
  std::vector<DecisionState> paths;
  std::vector<double> weights;
  std::size_t numDraws = 0;
};

// Draws (sigma, d) from p(sigma, d | theta, truth) by SMC, resampling when the
// ESS drops below the threshold and once more at the end.
LatentSample sampleLatentPaths(const TrainingInstance& instance, const Eigen::VectorXd& theta,
                               const EStepConfig& config);

struct QEstimate {
  double value = 0.0;
  double standardError = 0.0;
};

// sum_i sum_n w_in log L_c(path_in) - lambda ||theta||^2, with the Monte Carlo
// standard error sqrt(sum_i Var_i / numDraws_i).
QEstimate approximateQ(std::span<const TrainingInstance> instances,
                       std::span<const LatentSample> samples, const Eigen::VectorXd& theta,
                       double lambda);

struct MStepOptions {
  double gradientTolerance = 1e-6;
  std::size_t maxIterations = 200;
};

struct MStepResult {
  Eigen::VectorXd theta;
  double objective = 0.0;
  double gradientNorm = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Maximizes the penalized Monte Carlo objective by damped Newton steps on the
// exact Hessian (the objective is strictly concave for lambda > 0).
MStepResult mStep(std::span<const TrainingInstance> instances,
                  std::span<const LatentSample> samples, const Eigen::VectorXd& thetaInit,
                  double lambda, const MStepOptions& options = {});

struct McemConfig {
  // E-step particle count per iteration; the last entry repeats.
  std::vector<std::size_t> schedule = defaultSchedule();
  std::size_t maxIterations = 30;
  double lambda = 1.0;
  MStepOptions mStep;
  std::uint64_t seed = 1;
  EStepScheme scheme = EStepScheme::constrained;
  VisitPolicy policy = VisitPolicy::uniformRandom;
  // Stop once |dQ| < 2 SE holds this many iterations in a row; 0 disables.
  std::size_t stopPatience = 3;
  std::size_t lanes = 16;
  std::size_t threads = 0;

  // 100 particles for ten iterations, 500 afterwards.
  static std::vector<std::size_t> defaultSchedule() {
    std::vector<std::size_t> s(10, 100);
    s.push_back(500);
    return s;
  }
  std::size_t sampleSizeAt(std::size_t iteration) const;
};

struct McemIteration {
  std::size_t iteration = 0;  // 1-based
  std::size_t sampleSize = 0;
  Eigen::VectorXd theta;      // after the M-step
  double q = 0.0;             // Q(theta^{t+1} | theta^t)
  double qStandardError = 0.0;
  std::size_t mStepIterations = 0;
};

struct McemResult {
  Eigen::VectorXd theta;
  std::vector<McemIteration> trace;
  bool converged = false;
};

using McemCallback = std::function<void(const McemIteration&)>;

// Alternates E- and M-steps from theta = 0. The callback sees every iteration
// as it completes (checkpointing).
McemResult runMcem(std::span<const TrainingInstance> instances, std::size_t dimension,
                   const McemConfig& config, const McemCallback& onIteration = {});

// Bipartite parameter-recovery data: theta_j ~ N(0, tau^2), node covariates
// f ~ N(0, zeta^2 I_d), phi({u, v}) = |f_u - f_v|, a uniform visit order and
// decisions drawn from the model.
struct SyntheticSet {
  std::vector<TrainingInstance> instances;
  std::vector<DecisionState> paths;  // the generating (sigma, d), one per instance
  Eigen::VectorXd thetaTrue;
};

SyntheticSet generateSyntheticGraphs(std::size_t numInstances, std::size_t nodesPerPartition,
                                     std::size_t dimension, double tau, double zeta,
                                     std::mt19937_64& rng);

}  // namespace knotmatch
