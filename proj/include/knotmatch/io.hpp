#pragma once

#include <fstream>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "knotmatch/decision_model.hpp"
#include "knotmatch/geometry.hpp"
#include "knotmatch/mcem.hpp"
#include "knotmatch/metrics.hpp"
#include "knotmatch/smc.hpp"

namespace knotmatch {

// Board files are JSON lines, one board per line:
//   {"id": "...", "dims": {"length": L, "width": W, "height": H},
//    "faces": [{"p": 0, "x": .., "y": .., "z": .., "a": .., "b": .., "alpha": .., "label": 3}]}
// "label" is present only on annotated faces. Blank lines are skipped.
std::vector<Board> readBoards(std::istream& in, const std::string& source = "<stream>");
std::vector<Board> readBoardFile(const std::string& path);
void writeBoards(std::ostream& out, std::span<const Board> boards);
void writeBoardFile(const std::string& path, std::span<const Board> boards);

// {"theta": [...], "lambda": .., "standardization": {"shift": [...], "scale": [...]},
//  "layoutVersion": 1}
ModelParams readModelFile(const std::string& path);
void writeModel(std::ostream& out, const ModelParams& model);
void writeModelFile(const std::string& path, const ModelParams& model);

// iteration,sample_size,q,q_se,mstep_iterations,theta_0,...
void writeTraceHeader(std::ostream& out, std::size_t dimension);
void writeTraceRow(std::ostream& out, const McemIteration& it);

// Edges as arrays of face indices, e.g. [[0,3],[1],[2,4,5]].
std::string matchingToJson(const Matching& m);

struct BoardPrediction {
  std::string boardId;
  std::size_t numFaces = 0;
  std::size_t numSegments = 0;
  Matching map;
  MatchingPosterior posterior;
  double seconds = 0.0;
};

// One JSON line per board:
//   {"id", "num_faces", "segments", "seconds", "map": [[..]],
//    "posterior": [{"matching": [[..]], "weight": w, "count": c}, ...]}
void writePrediction(std::ostream& out, const BoardPrediction& p);
std::vector<BoardPrediction> readPredictionFile(const std::string& path);

void writeTimingHeader(std::ostream& out);
void writeTimingRow(std::ostream& out, const BoardPrediction& p);

void writeEvalHeader(std::ostream& out);
void writeEvalRow(std::ostream& out, const EvalReport& r);

// Opens a file for writing; throws DataError when that fails.
std::ofstream openOutput(const std::string& path);

}  // namespace knotmatch
