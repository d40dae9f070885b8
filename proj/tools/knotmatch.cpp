// knotmatch: simulate boards, train the decision model, predict and evaluate
// knot matchings.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "knotmatch/board_sim.hpp"
#include "knotmatch/errors.hpp"
#include "knotmatch/io.hpp"
#include "knotmatch/metrics.hpp"
#include "knotmatch/parallel.hpp"
#include "knotmatch/pipeline.hpp"

namespace km = knotmatch;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

// "100x10,500" -> ten iterations at 100 particles, then 500.
std::vector<std::size_t> parseSchedule(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto x = item.find('x');
    try {
      std::size_t pos = 0;
      const auto n = std::stoul(item.substr(0, x), &pos);
      if (pos != item.substr(0, x).size()) throw std::invalid_argument(item);
      std::size_t repeat = 1;
      if (x != std::string::npos) repeat = std::stoul(item.substr(x + 1));
      if (n == 0 || repeat == 0) throw std::invalid_argument(item);
      out.insert(out.end(), repeat, n);
    } catch (const std::logic_error&) {
      throw km::UsageError("bad E-step schedule item '" + item + "' (expected N or NxK)");
    }
  }
  if (out.empty()) throw km::UsageError("E-step schedule is empty");
  return out;
}

struct TrainFlags {
  double lambda = 1.0;
  std::string schedule = "100x10,500";
  std::size_t iters = 30;
  std::size_t patience = 3;
  double segmentThreshold = km::kDefaultSegmentThreshold;
};

struct PredictFlags {
  std::size_t particles = 1000;
  double segmentThreshold = km::kDefaultSegmentThreshold;
  bool noCorrection = false;
};

void addTrainFlags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--lambda", f.lambda, "L2 penalty weight")->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd->add_option("--estep-schedule", f.schedule, "E-step particles per iteration, e.g. 100x10,500 (last repeats)")
      ->capture_default_str();
  cmd->add_option("--iters", f.iters, "Maximum MC-EM iterations")->capture_default_str();
  cmd->add_option("--patience", f.patience, "Stop after this many iterations with |dQ| < 2 SE (0: never)")
      ->capture_default_str();
  cmd->add_option("--train-segment-threshold", f.segmentThreshold, "Segmentation distance for training")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void addPredictFlags(CLI::App* cmd, PredictFlags& f) {
  cmd->add_option("--particles", f.particles, "SMC particles per segment")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--segment-threshold", f.segmentThreshold, "Segmentation distance (0 disables)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd->add_flag("--no-correction", f.noCorrection, "Disable the overcounting correction");
}

km::TrainOptions trainOptions(const TrainFlags& f, std::uint64_t seed, std::size_t threads) {
  km::TrainOptions o;
  o.mcem.lambda = f.lambda;
  o.mcem.schedule = parseSchedule(f.schedule);
  o.mcem.maxIterations = f.iters;
  o.mcem.stopPatience = f.patience;
  o.mcem.seed = seed;
  o.mcem.threads = threads;
  o.segmentThreshold = f.segmentThreshold;
  return o;
}

km::PredictOptions predictOptions(const PredictFlags& f, std::uint64_t seed) {
  km::PredictOptions o;
  o.particles = f.particles;
  o.segmentThreshold = f.segmentThreshold;
  o.seed = seed;
  o.overcountingCorrection = !f.noCorrection;
  o.threads = 1;  // boards are the unit of parallel work
  return o;
}

void logTrainResult(const km::TrainResult& r) {
  if (!r.dropped.empty()) {
    std::cerr << "warning: dropped " << r.dropped.size()
              << " training segment(s) whose matching the model cannot produce:";
    for (const auto& id : r.dropped) std::cerr << ' ' << id;
    std::cerr << '\n';
  }
  std::cerr << "MC-EM: " << r.mcem.trace.size() << " iteration(s)"
            << (r.mcem.converged ? ", converged" : "") << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Knot-face matching on board surfaces"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 1;
  std::size_t threads = km::defaultThreadCount();
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (default: KNOTMATCH_THREADS or hardware)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate synthetic boards with ground-truth labels");
  std::size_t count = 100;
  km::SimConfig simConfig;
  bool allow4 = false;
  std::string simOut;
  sim->add_option("--count", count, "Number of boards")->capture_default_str();
  sim->add_option("--rho", simConfig.rho, "Mean knots per board")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--separation", simConfig.separation, "Minimum distance between branch axes")
      ->capture_default_str();
  sim->add_flag("--allow-4-faces", allow4, "Keep branches that cross all four surfaces");
  sim->add_option("--out", simOut, "Output board file (JSON lines)")->required();

  // train
  auto* trainCmd = app.add_subcommand("train", "Estimate model parameters by MC-EM");
  TrainFlags trainFlags;
  std::string boardsPath, modelOut, traceOut;
  trainCmd->add_option("--boards", boardsPath, "Labelled board file")->required();
  trainCmd->add_option("--out-model", modelOut, "Model file to write")->required();
  trainCmd->add_option("--out-trace", traceOut, "Per-iteration trace CSV");
  addTrainFlags(trainCmd, trainFlags);

  // predict
  auto* predictCmd = app.add_subcommand("predict", "Sample matchings for each board");
  PredictFlags predictFlags;
  std::string modelPath, predOut, timingOut;
  predictCmd->add_option("--boards", boardsPath, "Board file")->required();
  predictCmd->add_option("--model", modelPath, "Model file")->required();
  predictCmd->add_option("--out", predOut, "Posterior dump (JSON lines)")->required();
  predictCmd->add_option("--timing", timingOut, "Per-board timing CSV");
  addPredictFlags(predictCmd, predictFlags);

  // evaluate
  auto* evalCmd = app.add_subcommand("evaluate", "Score predictions against labelled boards");
  std::string predIn, truthPath, evalOut;
  evalCmd->add_option("--predictions", predIn, "Posterior dump from predict")->required();
  evalCmd->add_option("--truth", truthPath, "Labelled board file")->required();
  evalCmd->add_option("--out", evalOut, "Per-board report CSV")->required();

  // crossval
  auto* cvCmd = app.add_subcommand("crossval", "k-fold or leave-one-out train/predict/evaluate");
  std::size_t folds = 2;
  cvCmd->add_option("--boards", boardsPath, "Labelled board file")->required();
  cvCmd->add_option("--folds", folds, "Number of folds (0: leave-one-out)")->capture_default_str();
  cvCmd->add_option("--out", evalOut, "Per-board report CSV")->required();
  cvCmd->add_option("--predictions-out", predOut, "Posterior dump");
  cvCmd->add_option("--timing", timingOut, "Per-board timing CSV");
  addTrainFlags(cvCmd, trainFlags);
  addPredictFlags(cvCmd, predictFlags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (threads == 0) throw km::UsageError("--threads must be positive");

  if (*sim) {
    simConfig.seed = seed;
    simConfig.reject4Faces = !allow4;
    auto out = km::openOutput(simOut);
    std::vector<km::Board> boards;
    boards.reserve(count);
    for (auto& b : km::generateBoards(simConfig, count)) boards.push_back(std::move(b.board));
    km::writeBoards(out, boards);
    if (!out) throw km::DataError("failed writing '" + simOut + "'");
    return kOk;
  }

  if (*trainCmd) {
    const auto boards = km::readBoardFile(boardsPath);
    const auto options = trainOptions(trainFlags, seed, threads);
    std::ofstream trace;
    if (!traceOut.empty()) {
      trace = km::openOutput(traceOut);
      km::writeTraceHeader(trace, km::kCovariateDim);
    }
    const auto result = km::train(boards, options, [&](const km::McemIteration& it) {
      std::cerr << "iteration " << it.iteration << ": Q = " << it.q << " (SE " << it.qStandardError << ")\n";
      if (trace.is_open()) {
        km::writeTraceRow(trace, it);
        trace.flush();
      }
    });
    logTrainResult(result);
    km::writeModelFile(modelOut, result.model);
    return kOk;
  }

  if (*predictCmd) {
    const auto boards = km::readBoardFile(boardsPath);
    const auto model = km::readModelFile(modelPath);
    const auto options = predictOptions(predictFlags, seed);
    auto out = km::openOutput(predOut);
    std::ofstream timing;
    if (!timingOut.empty()) {
      timing = km::openOutput(timingOut);
      km::writeTimingHeader(timing);
    }
    std::vector<km::BoardPrediction> preds(boards.size());
    km::parallelFor(boards.size(), threads,
                    [&](std::size_t i) { preds[i] = km::predictBoard(boards[i], model, options, i); });
    for (const auto& p : preds) {
      km::writePrediction(out, p);
      if (timing.is_open()) km::writeTimingRow(timing, p);
    }
    if (!out) throw km::DataError("failed writing '" + predOut + "'");
    return kOk;
  }

  if (*evalCmd) {
    const auto preds = km::readPredictionFile(predIn);
    const auto boards = km::readBoardFile(truthPath);
    std::map<std::string, const km::Board*> byId;
    for (const auto& b : boards) byId[b.id] = &b;
    if (preds.size() != boards.size()) {
      throw km::DataError("prediction file has " + std::to_string(preds.size()) + " boards, truth has " +
                          std::to_string(boards.size()));
    }
    auto out = km::openOutput(evalOut);
    km::writeEvalHeader(out);
    std::vector<km::EvalReport> reports;
    for (const auto& p : preds) {
      const auto it = byId.find(p.boardId);
      if (it == byId.end()) throw km::DataError("board id '" + p.boardId + "' not found in the truth file");
      if (it->second->faces.size() != p.numFaces) {
        throw km::DataError("board '" + p.boardId + "': face counts differ between prediction and truth");
      }
      auto r = km::evaluateBoard(p.boardId, p.posterior, p.map, it->second->groundTruth());
      r.numFaces = p.numFaces;
      km::writeEvalRow(out, r);
      reports.push_back(r);
    }
    std::cout << "aggregate accuracy " << km::aggregateAccuracy(reports) << '\n';
    return kOk;
  }

  if (*cvCmd) {
    const auto boards = km::readBoardFile(boardsPath);
    const auto result = km::crossValidate(boards, folds, trainOptions(trainFlags, seed, threads),
                                          predictOptions(predictFlags, seed),
                                          [](const std::string& msg) { std::cerr << msg << '\n'; });
    auto out = km::openOutput(evalOut);
    km::writeEvalHeader(out);
    for (const auto& r : result.reports) km::writeEvalRow(out, r);
    if (!predOut.empty()) {
      auto pout = km::openOutput(predOut);
      for (const auto& p : result.predictions) km::writePrediction(pout, p);
    }
    if (!timingOut.empty()) {
      auto tout = km::openOutput(timingOut);
      km::writeTimingHeader(tout);
      for (const auto& p : result.predictions) km::writeTimingRow(tout, p);
    }
    std::cout << "aggregate accuracy " << result.aggregateAccuracy << '\n';
    return kOk;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const km::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const km::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const km::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const km::ContractViolation& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
}
