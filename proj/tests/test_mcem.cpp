#include <doctest.h>

#include <cmath>
#include <map>
#include <memory>
#include <random>

#include "knotmatch/errors.hpp"
#include "knotmatch/mcem.hpp"
#include "oracles.hpp"

using namespace knotmatch;

namespace {

using PathKey = std::pair<std::vector<int>, std::vector<oracle::Nodes>>;

PathKey keyOf(const DecisionState& s) {
  PathKey k;
  k.first.assign(s.visitOrder().begin(), s.visitOrder().end());
  for (const auto& d : s.decisions()) k.second.push_back(oracle::Nodes(d.begin(), d.end()));
  return k;
}

DecisionState replayPath(const Problem& p, const oracle::Path& path) {
  std::vector<Edge> d;
  for (const auto& x : path.decisions) d.push_back(oracle::toEdge(x));
  std::vector<NodeIndex> order(path.order.begin(), path.order.end());
  return replay(p.kind, p.graph, order, d);
}

// Exact conditional distribution over paths ending in the instance truth.
std::map<PathKey, double> exactConditional(const TrainingInstance& inst, const Eigen::VectorXd& theta,
                                           std::vector<oracle::Path>* consistent = nullptr) {
  const auto truth = oracle::canonOf(inst.truth);
  std::map<PathKey, double> out;
  double total = 0.0;
  for (const auto& p : oracle::enumeratePaths(inst.problem, theta)) {
    if (p.final != truth) continue;
    out[{p.order, p.decisions}] += p.prob;
    total += p.prob;
    if (consistent) consistent->push_back(p);
  }
  for (auto& [k, w] : out) w /= total;
  return out;
}

double logMarginal(const TrainingInstance& inst, const Eigen::VectorXd& theta) {
  const auto truth = oracle::canonOf(inst.truth);
  double total = 0.0;
  for (const auto& p : oracle::enumeratePaths(inst.problem, theta)) {
    if (p.final == truth) total += p.prob;
  }
  return std::log(total);
}

// Knot instance whose truth is a model draw at a random theta.
TrainingInstance randomInstance(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  TrainingInstance inst;
  inst.id = "random";
  inst.problem = oracle::randomKnotProblem(n, dim, rng);
  const auto theta = oracle::randomTheta(dim, 1.0, rng);
  DecisionState s(n);
  while (!isComplete(inst.problem.kind, inst.problem.graph, s)) {
    const auto v = sampleNextNode(inst.problem, s, VisitPolicy::uniformRandom, rng).node;
    s = applyDecision(inst.problem.kind, inst.problem.graph, s, v,
                      sampleDecision(inst.problem, s, v, theta, rng).decision);
  }
  inst.truth = s.matching();
  return inst;
}

double tv(const std::map<PathKey, double>& a, const std::map<PathKey, double>& b) {
  std::map<PathKey, double> diff = a;
  for (const auto& [k, w] : b) diff[k] -= w;
  double s = 0.0;
  for (const auto& [k, w] : diff) s += std::abs(w);
  return 0.5 * s;
}

}  // namespace

TEST_CASE("a two-node pair is reached by every sampled path") {
  TrainingInstance inst;
  inst.id = "pair";
  inst.problem.graph = HyperGraph(2, {0, 1});
  inst.problem.features = std::make_shared<oracle::RandomEdgeFeatures>(2, 2, 3);
  inst.truth = Matching({Edge{0, 1}});
  EStepConfig cfg;
  cfg.numParticles = 500;
  const auto s = sampleLatentPaths(inst, Eigen::Vector2d(0.5, -1.0), cfg);
  double total = 0.0;
  for (std::size_t i = 0; i < s.paths.size(); ++i) {
    CHECK(s.paths[i].matching() == inst.truth);
    total += s.weights[i];
  }
  CHECK(total == doctest::Approx(1.0));
  CHECK(s.numDraws == 500);
  CHECK(s.paths.size() == 2);
}

TEST_CASE("a bipartite matching is reached through several visit orders") {
  TrainingInstance inst;
  inst.id = "fig";
  inst.problem.graph = HyperGraph(2, {0, 1, 0, 1, 0, 1});
  inst.problem.kind = DecisionKind::bipartite;
  std::vector<double> f{0.1, 0.4, 0.9, 0.3, 0.5, 0.2};
  inst.problem.features = std::make_shared<NodeDifferenceFeatures>(1, f);
  inst.truth = Matching({Edge{0, 5}, Edge{1, 2}, Edge{3, 4}});
  validateInstance(inst);
  EStepConfig cfg;
  cfg.numParticles = 2000;
  const auto s = sampleLatentPaths(inst, Eigen::VectorXd::Zero(1), cfg);
  std::set<std::vector<int>> orders;
  for (const auto& p : s.paths) {
    CHECK(p.matching() == inst.truth);
    orders.insert(std::vector<int>(p.visitOrder().begin(), p.visitOrder().end()));
  }
  CHECK(orders.count({0, 2, 4}) == 1);
  CHECK(orders.count({2, 0, 4}) == 1);
}

TEST_CASE("latent path frequencies match the exact conditional distribution") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 6; ++trial) {
    const auto inst = randomInstance(3 + rng() % 3, 2, rng);
    const auto theta = oracle::randomTheta(2, 1.0, rng);
    const auto exact = exactConditional(inst, theta);
    for (auto scheme : {EStepScheme::constrained, EStepScheme::indicator}) {
      EStepConfig cfg;
      cfg.numParticles = 20000;
      cfg.seed = 7 + static_cast<std::uint64_t>(trial);
      cfg.scheme = scheme;
      const auto s = sampleLatentPaths(inst, theta, cfg);
      std::map<PathKey, double> got;
      for (std::size_t i = 0; i < s.paths.size(); ++i) got[keyOf(s.paths[i])] += s.weights[i];
      CHECK(tv(got, exact) < 0.03);
    }
  }
}

TEST_CASE("unreachable truths are rejected") {
  TrainingInstance inst;
  inst.id = "bad";
  inst.problem.graph = HyperGraph(4, {0, 1, 2, 3});
  inst.problem.features = std::make_shared<oracle::RandomEdgeFeatures>(4, 2, 3);
  // Two singletons on different partitions cannot both arise.
  inst.truth = Matching({Edge{0, 1}, Edge{2}, Edge{3}});
  CHECK_THROWS_AS(validateInstance(inst), DataError);
}

TEST_CASE("Q estimate of a single path") {
  std::mt19937_64 rng(42);
  const auto inst = randomInstance(5, 3, rng);
  EStepConfig cfg;
  cfg.numParticles = 1;
  const auto s = sampleLatentPaths(inst, Eigen::VectorXd::Zero(3), cfg);
  REQUIRE(s.paths.size() == 1);
  const auto theta = oracle::randomTheta(3, 1.0, rng);
  const std::vector<TrainingInstance> insts{inst};
  const std::vector<LatentSample> samples{s};
  const auto q = approximateQ(insts, samples, theta, 0.7);
  CHECK(q.value == doctest::Approx(pathLogLikelihood(inst.problem, s.paths[0], theta, VisitPolicy::uniformRandom) -
                                   0.7 * theta.squaredNorm()));
  CHECK(q.standardError == 0.0);
}

TEST_CASE("Monte Carlo Q agrees with the enumerated expectation") {
  std::mt19937_64 rng(43);
  std::vector<TrainingInstance> insts;
  for (int i = 0; i < 4; ++i) insts.push_back(randomInstance(4 + rng() % 2, 2, rng));
  const auto theta = oracle::randomTheta(2, 0.8, rng);
  double exact = -theta.squaredNorm();
  std::vector<LatentSample> samples;
  for (std::size_t i = 0; i < insts.size(); ++i) {
    std::vector<oracle::Path> paths;
    const auto cond = exactConditional(insts[i], theta, &paths);
    for (const auto& p : paths) {
      exact += cond.at({p.order, p.decisions}) *
               pathLogLikelihood(insts[i].problem, replayPath(insts[i].problem, p), theta, VisitPolicy::uniformRandom);
    }
    EStepConfig cfg;
    cfg.numParticles = 2000;
    cfg.seed = 50 + i;
    samples.push_back(sampleLatentPaths(insts[i], theta, cfg));
  }
  const auto q = approximateQ(insts, samples, theta, 1.0);
  CHECK(q.standardError > 0.0);
  CHECK(std::abs(q.value - exact) < 2.0 * q.standardError);
}

TEST_CASE("M-step optimum is unique, stationary and shrinks with lambda") {
  std::mt19937_64 rng(44);
  std::vector<TrainingInstance> insts;
  std::vector<LatentSample> samples;
  for (int i = 0; i < 6; ++i) {
    insts.push_back(randomInstance(6, 3, rng));
    EStepConfig cfg;
    cfg.numParticles = 200;
    cfg.seed = 60 + i;
    samples.push_back(sampleLatentPaths(insts.back(), Eigen::VectorXd::Zero(3), cfg));
  }
  const auto a = mStep(insts, samples, Eigen::VectorXd::Zero(3), 1.0);
  const auto b = mStep(insts, samples, oracle::randomTheta(3, 3.0, rng), 1.0);
  CHECK(a.converged);
  CHECK(b.converged);
  CHECK((a.theta - b.theta).norm() < 1e-4);
  CHECK(a.gradientNorm < 1e-6);
  const auto q = approximateQ(insts, samples, a.theta, 1.0);
  CHECK(q.value == doctest::Approx(a.objective));
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd other = a.theta + oracle::randomTheta(3, 0.3, rng);
    CHECK(approximateQ(insts, samples, other, 1.0).value <= a.objective + 1e-9);
  }
  const auto big = mStep(insts, samples, Eigen::VectorXd::Zero(3), 1e8);
  CHECK(big.theta.norm() < 1e-5);
}

TEST_CASE("zero covariates give a zero estimate") {
  TrainingInstance inst;
  inst.id = "flat";
  inst.problem.graph = HyperGraph(2, {0, 1, 0, 1});
  inst.problem.kind = DecisionKind::bipartite;
  inst.problem.features = std::make_shared<NodeDifferenceFeatures>(2, std::vector<double>(8, 1.5));
  inst.truth = Matching({Edge{0, 1}, Edge{2, 3}});
  const std::vector<TrainingInstance> insts{inst};
  EStepConfig cfg;
  const std::vector<LatentSample> samples{sampleLatentPaths(inst, Eigen::VectorXd::Zero(2), cfg)};
  const auto m = mStep(insts, samples, Eigen::Vector2d(1.0, -2.0), 1.0);
  CHECK(m.theta.norm() < 1e-8);
}

TEST_CASE("exact EM never lowers the penalized marginal likelihood") {
  std::mt19937_64 rng(45);
  std::vector<TrainingInstance> insts;
  for (int i = 0; i < 5; ++i) insts.push_back(randomInstance(4 + rng() % 2, 2, rng));
  const double lambda = 0.1;
  auto objective = [&](const Eigen::VectorXd& th) {
    double s = -lambda * th.squaredNorm();
    for (const auto& inst : insts) s += logMarginal(inst, th);
    return s;
  };
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
  double last = objective(theta);
  for (int t = 0; t < 6; ++t) {
    std::vector<LatentSample> samples;
    for (const auto& inst : insts) {
      std::vector<oracle::Path> paths;
      const auto cond = exactConditional(inst, theta, &paths);
      LatentSample s;
      s.numDraws = 1000000;
      for (const auto& p : paths) {
        s.paths.push_back(replayPath(inst.problem, p));
        s.weights.push_back(cond.at({p.order, p.decisions}));
      }
      samples.push_back(std::move(s));
    }
    theta = mStep(insts, samples, theta, lambda).theta;
    const double now = objective(theta);
    CHECK(now >= last - 1e-9);
    last = now;
  }
}

TEST_CASE("MC-EM edge cases and determinism") {
  McemConfig cfg;
  const auto empty = runMcem({}, 3, cfg);
  CHECK(empty.theta.size() == 3);
  CHECK(empty.theta.norm() == 0.0);
  CHECK(empty.trace.empty());

  std::mt19937_64 rng(46);
  auto set = generateSyntheticGraphs(4, 4, 2, 1.0, 1.0, rng);
  cfg.schedule = {50};
  cfg.maxIterations = 3;
  std::vector<std::size_t> seen;
  const auto a = runMcem(set.instances, 2, cfg, [&](const McemIteration& it) { seen.push_back(it.iteration); });
  CHECK(seen == std::vector<std::size_t>{1, 2, 3});
  cfg.threads = 2;
  const auto b = runMcem(set.instances, 2, cfg);
  CHECK(a.theta == b.theta);
  CHECK(a.trace.back().q == b.trace.back().q);
  cfg.schedule = {};
  CHECK_THROWS_AS(runMcem(set.instances, 2, cfg), UsageError);
  cfg.schedule = {10, 20};
  CHECK(cfg.sampleSizeAt(0) == 10);
  CHECK(cfg.sampleSizeAt(7) == 20);
  CHECK(McemConfig{}.sampleSizeAt(9) == 100);
  CHECK(McemConfig{}.sampleSizeAt(10) == 500);
}

TEST_CASE("synthetic generator") {
  std::mt19937_64 rng(47);
  const auto flat = generateSyntheticGraphs(3, 5, 2, 0.0, 1.0, rng);
  CHECK(flat.thetaTrue.norm() == 0.0);
  const auto set = generateSyntheticGraphs(10, 6, 2, 1.0, 1.0, rng);
  CHECK(set.instances.size() == 10);
  REQUIRE(set.paths.size() == 10);
  for (std::size_t i = 0; i < set.instances.size(); ++i) {
    const auto& inst = set.instances[i];
    CHECK(set.paths[i].matching() == inst.truth);
    CHECK(set.paths[i].visitOrder().size() == 6);
    validateMatching(inst.problem.graph, inst.truth);
    CHECK(isReachableMatching(DecisionKind::bipartite, inst.problem.graph, inst.truth));
    CHECK_NOTHROW(validateInstance(inst));
  }
  CHECK_THROWS_AS(generateSyntheticGraphs(0, 4, 2, 1.0, 1.0, rng), UsageError);
}

TEST_CASE("Monte Carlo objective is concave along random segments") {
  std::mt19937_64 rng(48);
  std::vector<TrainingInstance> insts;
  std::vector<LatentSample> samples;
  for (int i = 0; i < 5; ++i) {
    insts.push_back(randomInstance(6, 3, rng));
    EStepConfig cfg;
    cfg.numParticles = 100;
    cfg.seed = 90 + i;
    samples.push_back(sampleLatentPaths(insts.back(), Eigen::VectorXd::Zero(3), cfg));
  }
  for (int t = 0; t < 50; ++t) {
    const auto a = oracle::randomTheta(3, 2.0, rng);
    const auto b = oracle::randomTheta(3, 2.0, rng);
    const double qa = approximateQ(insts, samples, a, 1.0).value;
    const double qb = approximateQ(insts, samples, b, 1.0).value;
    const double qm = approximateQ(insts, samples, 0.5 * (a + b), 1.0).value;
    CHECK(qm >= 0.5 * (qa + qb) - 1e-9);
  }
}
