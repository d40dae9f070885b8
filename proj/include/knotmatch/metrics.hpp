#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "knotmatch/graph.hpp"
#include "knotmatch/smc.hpp"

namespace knotmatch {

// Fraction of true edges reproduced exactly; 1 for an empty truth.
double accuracy(const Matching& predicted, const Matching& truth);
std::size_t correctEdges(const Matching& predicted, const Matching& truth);

// |A ∩ B| / |A ∪ B| for the edges holding one node in two matchings.
double nodeJaccard(const Edge& a, const Edge& b);

// Per-node Jaccard averaged over nodes. Both matchings must cover the same
// nodes; throws ContractViolation otherwise. 1 when there are no nodes.
double jaccardIndex(const Matching& particle, const Matching& truth);

struct EvalReport {
  std::string boardId;
  std::size_t numFaces = 0;
  std::size_t trueEdges = 0;
  std::size_t correct = 0;  // true edges present in the MAP matching
  double accuracy = 1.0;
  // Jaccard over the particle population.
  double jaccardMean = 1.0;          // each particle counted once
  double jaccardWeightedMean = 1.0;  // posterior weights
  double jaccardMin = 1.0;
  double jaccardMax = 1.0;
};

EvalReport evaluateBoard(const std::string& boardId, const MatchingPosterior& posterior,
                         const Matching& predicted, const Matching& truth);

// Total correct edges over total true edges.
double aggregateAccuracy(std::span<const EvalReport> reports);

}  // namespace knotmatch
