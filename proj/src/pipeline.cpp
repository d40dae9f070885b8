#include "knotmatch/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>

#include "knotmatch/errors.hpp"
#include "knotmatch/parallel.hpp"

namespace knotmatch {

Board subBoard(const Board& board, std::span<const NodeIndex> nodes) {
  Board out;
  out.id = board.id;
  out.dims = board.dims;
  out.faces.reserve(nodes.size());
  for (NodeIndex v : nodes) out.faces.push_back(board.faces.at(static_cast<std::size_t>(v)));
  return out;
}

Problem makeProblem(const Board& board, const Standardization& standardization) {
  Problem p;
  p.graph = board.graph();
  p.kind = DecisionKind::knot;
  p.features = std::make_shared<BoardFeatures>(board.faces, standardization);
  return p;
}

std::vector<std::vector<NodeIndex>> trainingSegments(const Board& board, double threshold) {
  const auto clusters = segmentBoard(board, threshold);
  const std::size_t n = board.faces.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto unite = [&](std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };
  for (const auto& c : clusters) {
    for (std::size_t k = 1; k < c.size(); ++k) unite(static_cast<std::size_t>(c[0]), static_cast<std::size_t>(c[k]));
  }
  const Matching truth = board.groundTruth();
  for (const Edge& e : truth.edges()) {
    for (std::size_t k = 1; k < e.size(); ++k) unite(static_cast<std::size_t>(e[0]), static_cast<std::size_t>(e[k]));
  }
  std::map<std::size_t, std::vector<NodeIndex>> merged;
  for (std::size_t i = 0; i < n; ++i) merged[find(i)].push_back(static_cast<NodeIndex>(i));
  std::vector<std::vector<NodeIndex>> out;
  for (auto& [root, members] : merged) out.push_back(std::move(members));
  return out;
}

namespace {

void requireAnnotated(std::span<const Board> boards) {
  std::string unlabeled;
  for (const Board& b : boards) {
    if (!b.isAnnotated()) unlabeled += (unlabeled.empty() ? "" : ", ") + b.id;
  }
  if (!unlabeled.empty()) throw DataError("training needs labelled boards; unlabeled: " + unlabeled);
}

}  // namespace

InstanceSet buildTrainingInstances(std::span<const Board> boards,
                                   const Standardization& standardization, double threshold) {
  requireAnnotated(boards);
  InstanceSet out;
  for (const Board& board : boards) {
    const auto segments = trainingSegments(board, threshold);
    for (std::size_t k = 0; k < segments.size(); ++k) {
      const Board sub = subBoard(board, segments[k]);
      TrainingInstance inst;
      inst.id = board.id + "#" + std::to_string(k);
      inst.truth = sub.groundTruth();
      inst.problem = makeProblem(sub, standardization);
      if (!isReachableMatching(DecisionKind::knot, inst.problem.graph, inst.truth)) {
        out.dropped.push_back(inst.id);
        continue;
      }
      out.instances.push_back(std::move(inst));
    }
  }
  return out;
}

TrainResult train(std::span<const Board> boards, const TrainOptions& options,
                  const McemCallback& onIteration) {
  TrainResult out;
  out.model.lambda = options.mcem.lambda;
  requireAnnotated(boards);
  out.model.standardization = fitStandardization(boards);
  auto set = buildTrainingInstances(boards, out.model.standardization, options.segmentThreshold);
  out.dropped = std::move(set.dropped);
  out.mcem = runMcem(set.instances, kCovariateDim, options.mcem, onIteration);
  out.model.theta = out.mcem.theta;
  return out;
}

BoardPrediction predictBoard(const Board& board, const ModelParams& model,
                             const PredictOptions& options, std::uint64_t stream) {
  if (model.theta.size() != static_cast<Eigen::Index>(kCovariateDim)) {
    throw DataError("model theta has dimension " + std::to_string(model.theta.size()));
  }
  if (options.particles == 0) throw UsageError("need at least one particle");
  const auto start = std::chrono::steady_clock::now();
  BoardPrediction out;
  out.boardId = board.id;
  out.numFaces = board.faces.size();
  if (board.faces.empty()) {
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  }

  std::vector<std::vector<NodeIndex>> segments;
  if (options.segmentThreshold > 0.0) {
    segments = segmentBoard(board, options.segmentThreshold);
  } else {
    segments.emplace_back(board.faces.size());
    std::iota(segments.back().begin(), segments.back().end(), 0);
  }
  out.numSegments = segments.size();

  const std::size_t n = options.particles;
  std::vector<std::vector<Edge>> particleEdges(n);
  std::vector<double> logW(n, 0.0);
  std::vector<Edge> mapEdges;
  auto toBoard = [](const Edge& e, std::span<const NodeIndex> nodes) {
    std::array<NodeIndex, kMaxEdgeSize> mapped{};
    for (std::size_t k = 0; k < e.size(); ++k) mapped[k] = nodes[static_cast<std::size_t>(e[k])];
    return Edge(std::span<const NodeIndex>(mapped.data(), e.size()));
  };
  const std::uint64_t boardSeed = deriveSeed(options.seed, stream);
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const auto& nodes = segments[k];
    const Problem problem = makeProblem(subBoard(board, nodes), model.standardization);
    SmcConfig cfg;
    cfg.numParticles = n;
    cfg.seed = deriveSeed(boardSeed, k);
    cfg.overcountingCorrection = options.overcountingCorrection;
    cfg.lanes = options.lanes;
    cfg.threads = options.threads;
    const auto result = runSmc(problem, model.theta, cfg);
    const Matching segmentMap = mapMatching(result.posterior);
    for (const Edge& e : segmentMap.edges()) mapEdges.push_back(toBoard(e, nodes));
    for (std::size_t i = 0; i < n; ++i) {
      for (const Edge& e : result.particles[i].state.edges()) particleEdges[i].push_back(toBoard(e, nodes));
      logW[i] += std::log(result.weights[i]);
    }
  }
  std::vector<Matching> matchings;
  matchings.reserve(n);
  for (auto& edges : particleEdges) matchings.emplace_back(std::move(edges));
  out.posterior = MatchingPosterior::aggregate(matchings, normalizedWeights(logW));
  out.map = Matching(std::move(mapEdges));
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

CrossValidationResult crossValidate(std::span<const Board> boards, std::size_t folds,
                                    const TrainOptions& trainOptions,
                                    const PredictOptions& predictOptions,
                                    const std::function<void(const std::string&)>& log) {
  CrossValidationResult out;
  const std::size_t n = boards.size();
  if (n == 0) return out;
  const std::size_t k = (folds == 0 || folds >= n) ? n : folds;
  if (k < 2) throw UsageError("cross-validation needs at least two folds");
  out.reports.resize(n);
  out.predictions.resize(n);
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * n / k;
    const std::size_t hi = (f + 1) * n / k;
    std::vector<Board> trainSet;
    for (std::size_t i = 0; i < n; ++i) {
      if (i < lo || i >= hi) trainSet.push_back(boards[i]);
    }
    if (log) log("fold " + std::to_string(f + 1) + "/" + std::to_string(k) + ": training on " +
                 std::to_string(trainSet.size()) + " boards");
    out.folds.push_back(train(trainSet, trainOptions));
    const auto& model = out.folds.back().model;
    for (std::size_t i = lo; i < hi; ++i) {
      out.predictions[i] = predictBoard(boards[i], model, predictOptions, i);
      out.reports[i] = evaluateBoard(boards[i].id, out.predictions[i].posterior, out.predictions[i].map,
                                     boards[i].groundTruth());
      out.reports[i].numFaces = boards[i].faces.size();
    }
    if (log) {
      log("fold " + std::to_string(f + 1) + ": accuracy " +
          std::to_string(aggregateAccuracy(std::span<const EvalReport>(out.reports.data() + lo, hi - lo))));
    }
  }
  out.aggregateAccuracy = aggregateAccuracy(out.reports);
  return out;
}

}  // namespace knotmatch
