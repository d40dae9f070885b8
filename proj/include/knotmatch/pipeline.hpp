#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "knotmatch/decision_model.hpp"
#include "knotmatch/geometry.hpp"
#include "knotmatch/io.hpp"
#include "knotmatch/mcem.hpp"
#include "knotmatch/metrics.hpp"
#include "knotmatch/smc.hpp"

namespace knotmatch {

// Faces of `board` listed in `nodes`, in that order; labels are kept.
Board subBoard(const Board& board, std::span<const NodeIndex> nodes);

// Knot-model problem over a board with standardized covariates.
Problem makeProblem(const Board& board, const Standardization& standardization);

// segmentBoard clusters, additionally merged along ground-truth edges so that
// no observed edge is split.
std::vector<std::vector<NodeIndex>> trainingSegments(const Board& board, double threshold);

struct InstanceSet {
  std::vector<TrainingInstance> instances;
  std::vector<std::string> dropped;  // segments whose truth the model cannot produce
};

// Throws DataError listing unlabeled boards.
InstanceSet buildTrainingInstances(std::span<const Board> boards,
                                   const Standardization& standardization, double threshold);

struct TrainOptions {
  McemConfig mcem;
  double segmentThreshold = kDefaultSegmentThreshold;
};

struct TrainResult {
  ModelParams model;
  McemResult mcem;
  std::vector<std::string> dropped;
};

TrainResult train(std::span<const Board> boards, const TrainOptions& options,
                  const McemCallback& onIteration = {});

struct PredictOptions {
  std::size_t particles = 1000;
  double segmentThreshold = kDefaultSegmentThreshold;  // <= 0 disables segmentation
  std::uint64_t seed = 1;
  bool overcountingCorrection = true;
  std::size_t lanes = 16;
  std::size_t threads = 0;
};

// Runs the sampler on every segment. Board-level particle n is the union of
// particle n from each segment with the product of their weights; the MAP is
// the union of the per-segment MAP matchings. `stream` decorrelates boards.
BoardPrediction predictBoard(const Board& board, const ModelParams& model,
                             const PredictOptions& options, std::uint64_t stream = 0);

struct CrossValidationResult {
  std::vector<EvalReport> reports;  // in board order
  std::vector<BoardPrediction> predictions;
  std::vector<TrainResult> folds;
  double aggregateAccuracy = 1.0;
};

// k-fold cross-validation over contiguous blocks of boards; folds == 0 or
// folds >= boards.size() means leave-one-out.
CrossValidationResult crossValidate(std::span<const Board> boards, std::size_t folds,
                                    const TrainOptions& train, const PredictOptions& predict,
                                    const std::function<void(const std::string&)>& log = {});

}  // namespace knotmatch
