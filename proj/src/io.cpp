#include "knotmatch/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "knotmatch/errors.hpp"

namespace knotmatch {

using nlohmann::json;

namespace {

std::ifstream openInput(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

template <class T>
T field(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(where + ": field '" + key + "' has the wrong type");
  }
}

json matchingJson(const Matching& m) {
  json edges = json::array();
  for (const Edge& e : m.edges()) edges.push_back(std::vector<NodeIndex>(e.begin(), e.end()));
  return edges;
}

Matching matchingFromJson(const json& j, const std::string& where) {
  if (!j.is_array()) throw DataError(where + ": matching must be an array of edges");
  std::vector<Edge> edges;
  try {
    for (const auto& e : j) {
      const auto nodes = e.get<std::vector<NodeIndex>>();
      if (nodes.empty() || nodes.size() > kMaxEdgeSize) throw DataError(where + ": bad edge size");
      edges.emplace_back(std::span<const NodeIndex>(nodes));
    }
    return Matching(std::move(edges));
  } catch (const json::exception&) {
    throw DataError(where + ": malformed edge");
  } catch (const ContractViolation& e) {
    throw DataError(where + ": " + e.what());
  }
}

std::vector<double> vectorField(const json& obj, const char* key, std::size_t size,
                                const std::string& where) {
  auto v = field<std::vector<double>>(obj, key, where);
  if (v.size() != size) {
    throw DataError(where + ": '" + key + "' must have " + std::to_string(size) + " entries");
  }
  return v;
}

}  // namespace

std::ofstream openOutput(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

// ---------------------------------------------------------------------------
// Boards

std::vector<Board> readBoards(std::istream& in, const std::string& source) {
  std::vector<Board> boards;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineNo);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw DataError(where + ": expected a JSON object");
    Board b;
    b.id = field<std::string>(j, "id", where);
    if (j.contains("dims")) {
      const auto& d = j["dims"];
      b.dims.length = field<double>(d, "length", where);
      b.dims.width = field<double>(d, "width", where);
      b.dims.height = field<double>(d, "height", where);
    }
    const auto faces = j.find("faces");
    if (faces == j.end() || !faces->is_array()) throw DataError(where + ": 'faces' must be an array");
    for (const auto& f : *faces) {
      KnotFace k;
      k.partition = field<int>(f, "p", where);
      k.x = field<double>(f, "x", where);
      k.y = field<double>(f, "y", where);
      k.z = field<double>(f, "z", where);
      k.a = field<double>(f, "a", where);
      k.b = field<double>(f, "b", where);
      k.alpha = f.contains("alpha") ? field<double>(f, "alpha", where) : 0.0;
      if (f.contains("label") && !f["label"].is_null()) k.label = field<int>(f, "label", where);
      b.faces.push_back(k);
    }
    validateBoard(b);
    boards.push_back(std::move(b));
  }
  return boards;
}

std::vector<Board> readBoardFile(const std::string& path) {
  auto in = openInput(path);
  return readBoards(in, path);
}

void writeBoards(std::ostream& out, std::span<const Board> boards) {
  for (const Board& b : boards) {
    json faces = json::array();
    for (const KnotFace& f : b.faces) {
      json jf = {{"p", f.partition}, {"x", f.x}, {"y", f.y}, {"z", f.z},
                 {"a", f.a},         {"b", f.b}, {"alpha", f.alpha}};
      if (f.label) jf["label"] = *f.label;
      faces.push_back(std::move(jf));
    }
    const json j = {{"id", b.id},
                    {"dims", {{"length", b.dims.length}, {"width", b.dims.width}, {"height", b.dims.height}}},
                    {"faces", std::move(faces)}};
    out << j.dump() << '\n';
  }
}

void writeBoardFile(const std::string& path, std::span<const Board> boards) {
  auto out = openOutput(path);
  writeBoards(out, boards);
  if (!out) throw DataError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Model

ModelParams readModelFile(const std::string& path) {
  auto in = openInput(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": invalid JSON (" + e.what() + ")");
  }
  const int version = field<int>(j, "layoutVersion", path);
  if (version != kCovariateLayoutVersion) {
    throw DataError(path + ": covariate layout version " + std::to_string(version) +
                    " is not supported (expected " + std::to_string(kCovariateLayoutVersion) + ")");
  }
  ModelParams m;
  const auto theta = vectorField(j, "theta", kCovariateDim, path);
  m.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  m.lambda = field<double>(j, "lambda", path);
  const auto st = j.find("standardization");
  if (st == j.end()) throw DataError(path + ": missing field 'standardization'");
  const auto shift = vectorField(*st, "shift", kCovariateDim, path);
  const auto scale = vectorField(*st, "scale", kCovariateDim, path);
  CovariateVector sh{}, sc{};
  for (std::size_t k = 0; k < kCovariateDim; ++k) {
    sh[k] = shift[k];
    sc[k] = scale[k];
    if (!(sc[k] > 0.0)) throw DataError(path + ": standardization scales must be positive");
  }
  if (!m.theta.allFinite()) throw DataError(path + ": theta must be finite");
  m.standardization = Standardization(sh, sc);
  return m;
}

void writeModel(std::ostream& out, const ModelParams& model) {
  const auto& st = model.standardization;
  const json j = {{"theta", std::vector<double>(model.theta.data(), model.theta.data() + model.theta.size())},
                  {"lambda", model.lambda},
                  {"standardization",
                   {{"shift", std::vector<double>(st.shift().begin(), st.shift().end())},
                    {"scale", std::vector<double>(st.scale().begin(), st.scale().end())}}},
                  {"layoutVersion", kCovariateLayoutVersion}};
  out << j.dump(2) << '\n';
}

void writeModelFile(const std::string& path, const ModelParams& model) {
  auto out = openOutput(path);
  writeModel(out, model);
  if (!out) throw DataError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Trace, predictions, reports

void writeTraceHeader(std::ostream& out, std::size_t dimension) {
  out << "iteration,sample_size,q,q_se,mstep_iterations";
  for (std::size_t j = 0; j < dimension; ++j) out << ",theta_" << j;
  out << '\n';
}

void writeTraceRow(std::ostream& out, const McemIteration& it) {
  std::ostringstream row;
  row << std::setprecision(12) << it.iteration << ',' << it.sampleSize << ',' << it.q << ','
      << it.qStandardError << ',' << it.mStepIterations;
  for (Eigen::Index j = 0; j < it.theta.size(); ++j) row << ',' << it.theta[j];
  out << row.str() << '\n';
}

std::string matchingToJson(const Matching& m) { return matchingJson(m).dump(); }

void writePrediction(std::ostream& out, const BoardPrediction& p) {
  json posterior = json::array();
  for (const auto& e : p.posterior.entries()) {
    posterior.push_back({{"matching", matchingJson(e.matching)}, {"weight", e.weight}, {"count", e.count}});
  }
  const json j = {{"id", p.boardId},       {"num_faces", p.numFaces},
                  {"segments", p.numSegments}, {"seconds", p.seconds},
                  {"map", matchingJson(p.map)}, {"posterior", std::move(posterior)}};
  out << j.dump() << '\n';
}

std::vector<BoardPrediction> readPredictionFile(const std::string& path) {
  auto in = openInput(path);
  std::vector<BoardPrediction> out;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineNo);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": invalid JSON (" + e.what() + ")");
    }
    BoardPrediction p;
    p.boardId = field<std::string>(j, "id", where);
    p.numFaces = field<std::size_t>(j, "num_faces", where);
    p.seconds = j.contains("seconds") ? field<double>(j, "seconds", where) : 0.0;
    p.numSegments = j.contains("segments") ? field<std::size_t>(j, "segments", where) : 0;
    if (!j.contains("map")) throw DataError(where + ": missing field 'map'");
    p.map = matchingFromJson(j["map"], where);
    std::vector<Matching> ms;
    std::vector<double> ws;
    if (j.contains("posterior")) {
      for (const auto& e : j["posterior"]) {
        if (!e.contains("matching")) throw DataError(where + ": posterior entry without matching");
        const auto count = e.contains("count") ? field<std::size_t>(e, "count", where) : std::size_t{1};
        const double w = field<double>(e, "weight", where);
        // Spread each entry's weight over its particles to keep the counts.
        const auto m = matchingFromJson(e["matching"], where);
        for (std::size_t c = 0; c < std::max<std::size_t>(count, 1); ++c) {
          ms.push_back(m);
          ws.push_back(w / static_cast<double>(std::max<std::size_t>(count, 1)));
        }
      }
    }
    if (!ms.empty()) p.posterior = MatchingPosterior::aggregate(ms, ws);
    out.push_back(std::move(p));
  }
  return out;
}

void writeTimingHeader(std::ostream& out) { out << "board_id,num_faces,seconds\n"; }

void writeTimingRow(std::ostream& out, const BoardPrediction& p) {
  std::ostringstream row;
  row << std::setprecision(6) << p.boardId << ',' << p.numFaces << ',' << p.seconds;
  out << row.str() << '\n';
}

void writeEvalHeader(std::ostream& out) {
  out << "board_id,num_faces,true_edges,correct_edges,accuracy,jaccard_mean,"
         "jaccard_weighted_mean,jaccard_min,jaccard_max\n";
}

void writeEvalRow(std::ostream& out, const EvalReport& r) {
  std::ostringstream row;
  row << std::setprecision(10) << r.boardId << ',' << r.numFaces << ',' << r.trueEdges << ','
      << r.correct << ',' << r.accuracy << ',' << r.jaccardMean << ',' << r.jaccardWeightedMean
      << ',' << r.jaccardMin << ',' << r.jaccardMax;
  out << row.str() << '\n';
}

}  // namespace knotmatch
