#include "knotmatch/metrics.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "knotmatch/errors.hpp"

namespace knotmatch {

std::size_t correctEdges(const Matching& predicted, const Matching& truth) {
  std::size_t hits = 0;
  for (const Edge& e : truth.edges()) hits += predicted.contains(e) ? 1 : 0;
  return hits;
}

double accuracy(const Matching& predicted, const Matching& truth) {
  if (truth.empty()) return 1.0;
  return static_cast<double>(correctEdges(predicted, truth)) / static_cast<double>(truth.size());
}

double nodeJaccard(const Edge& a, const Edge& b) {
  std::size_t common = 0;
  for (NodeIndex v : a) common += b.contains(v) ? 1 : 0;
  const std::size_t all = a.size() + b.size() - common;
  if (all == 0) throw ContractViolation("Jaccard index of two empty edges");
  return static_cast<double>(common) / static_cast<double>(all);
}

double jaccardIndex(const Matching& particle, const Matching& truth) {
  std::map<NodeIndex, const Edge*> inTruth;
  for (const Edge& e : truth.edges()) {
    for (NodeIndex v : e) inTruth[v] = &e;
  }
  if (particle.coveredNodeCount() != inTruth.size()) {
    throw ContractViolation("matchings cover different node sets");
  }
  if (inTruth.empty()) return 1.0;
  double total = 0.0;
  for (const Edge& e : particle.edges()) {
    for (NodeIndex v : e) {
      const auto it = inTruth.find(v);
      if (it == inTruth.end()) {
        throw ContractViolation("node " + std::to_string(v) + " is not covered by the truth");
      }
      total += nodeJaccard(e, *it->second);
    }
  }
  return total / static_cast<double>(inTruth.size());
}

EvalReport evaluateBoard(const std::string& boardId, const MatchingPosterior& posterior,
                         const Matching& predicted, const Matching& truth) {
  EvalReport r;
  r.boardId = boardId;
  r.numFaces = truth.coveredNodeCount();
  r.trueEdges = truth.size();
  r.correct = correctEdges(predicted, truth);
  r.accuracy = accuracy(predicted, truth);
  if (posterior.empty()) return r;
  double sum = 0.0;
  double weighted = 0.0;
  std::size_t count = 0;
  r.jaccardMin = std::numeric_limits<double>::infinity();
  r.jaccardMax = -std::numeric_limits<double>::infinity();
  for (const auto& entry : posterior.entries()) {
    const double j = jaccardIndex(entry.matching, truth);
    sum += j * static_cast<double>(entry.count);
    count += entry.count;
    weighted += j * entry.weight;
    r.jaccardMin = std::min(r.jaccardMin, j);
    r.jaccardMax = std::max(r.jaccardMax, j);
  }
  r.jaccardMean = count ? sum / static_cast<double>(count) : weighted;
  r.jaccardWeightedMean = weighted;
  return r;
}

double aggregateAccuracy(std::span<const EvalReport> reports) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& r : reports) {
    correct += r.correct;
    total += r.trueEdges;
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 1.0;
}

}  // namespace knotmatch
