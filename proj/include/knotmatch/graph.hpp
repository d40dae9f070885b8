#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace knotmatch {

using NodeIndex = std::int32_t;

// Knot matching restricts edges to at most three knot faces.
inline constexpr std::size_t kMaxEdgeSize = 3;

// Which decision sets drive the sequential model.
//  bipartite: only partition-0 nodes are visited, candidates are uncovered
//             nodes of the opposite partition.
//  knot:      every node is visited; uncovered nodes may pair with an
//             uncovered node or join an existing 2-edge.
enum class DecisionKind { bipartite, knot };

// K disjoint node partitions. Nodes are dense indices 0..size()-1.
class HyperGraph {
 public:
  HyperGraph() = default;
  HyperGraph(int numPartitions, std::vector<int> partitionOf);

  std::size_t size() const { return partitionOf_.size(); }
  int numPartitions() const { return numPartitions_; }
  int partition(NodeIndex v) const { return partitionOf_[static_cast<std::size_t>(v)]; }
  std::span<const int> partitions() const { return partitionOf_; }

  // Per-node key for the sorted visit policy (board x coordinate).
  void setSortKeys(std::vector<double> keys);
  std::span<const double> sortKeys() const { return sortKeys_; }

 private:
  int numPartitions_ = 0;
  std::vector<int> partitionOf_;
  std::vector<double> sortKeys_;
};

// A set of at most kMaxEdgeSize nodes, kept sorted. The empty edge doubles as
// the "no candidate" decision.
class Edge {
 public:
  Edge() = default;
  Edge(std::initializer_list<NodeIndex> nodes);
  explicit Edge(std::span<const NodeIndex> nodes);

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  NodeIndex operator[](std::size_t i) const { return nodes_[i]; }
  NodeIndex front() const { return nodes_[0]; }
  const NodeIndex* begin() const { return nodes_.data(); }
  const NodeIndex* end() const { return nodes_.data() + size_; }

  bool contains(NodeIndex v) const;
  // this ∪ {v}; v must not already be a member.
  Edge with(NodeIndex v) const;
  Edge without(NodeIndex v) const;

  bool operator==(const Edge& other) const;
  // Lexicographic over the sorted member sequence.
  std::strong_ordering operator<=>(const Edge& other) const;

  std::string toString() const;

 private:
  std::array<NodeIndex, kMaxEdgeSize> nodes_{};
  std::uint8_t size_ = 0;
};

// Set of pairwise disjoint edges in canonical (sorted) order.
class Matching {
 public:
  Matching() = default;
  // Sorts the edges; throws ContractViolation if two edges share a node.
  explicit Matching(std::vector<Edge> edges);

  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }
  bool contains(const Edge& e) const;
  // Edge covering v, or nullptr.
  const Edge* edgeContaining(NodeIndex v) const;
  std::size_t coveredNodeCount() const;

  bool operator==(const Matching& other) const = default;
  auto operator<=>(const Matching& other) const = default;

  std::string toString() const;

 private:
  std::vector<Edge> edges_;
};

// Throws ContractViolation unless every edge has 1..maxEdgeSize members from
// distinct partitions and edges are disjoint.
void validateMatching(const HyperGraph& graph, const Matching& matching,
                      std::size_t maxEdgeSize = kMaxEdgeSize);

// Partial matching together with the visit order and the decision taken at
// each visit. Values are immutable from the outside; they change only
// through applyDecision.
class DecisionState {
 public:
  DecisionState() = default;
  explicit DecisionState(std::size_t numNodes);

  std::size_t numNodes() const { return edgeOf_.size(); }
  std::size_t numVisited() const { return visitOrder_.size(); }
  bool isVisited(NodeIndex v) const { return visited_[static_cast<std::size_t>(v)] != 0; }
  bool isCovered(NodeIndex v) const { return edgeOf_[static_cast<std::size_t>(v)] >= 0; }
  // Index into edges() of the edge covering v, or -1.
  int edgeIndexOf(NodeIndex v) const { return edgeOf_[static_cast<std::size_t>(v)]; }

  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const NodeIndex> visitOrder() const { return visitOrder_; }
  std::span<const Edge> decisions() const { return decisions_; }

  Matching matching() const;
  // Per-node canonical label (smallest member of the covering edge, -1 when
  // uncovered). Two states have equal matchings iff their labels are equal.
  std::vector<NodeIndex> matchingLabels() const;

 private:
  friend DecisionState applyDecisionUnchecked(DecisionState state, NodeIndex v, const Edge& d);

  std::vector<int> edgeOf_;
  std::vector<char> visited_;
  std::vector<Edge> edges_;
  std::vector<NodeIndex> visitOrder_;
  std::vector<Edge> decisions_;
};

// Bipartite decision set for v: every uncovered node of the other partition
// as a singleton candidate, in index order. Empty when none remain.
// Throws UsageError if v was already visited or the graph is not bipartite.
std::vector<Edge> decisionSetBipartite(const HyperGraph& graph, const DecisionState& state,
                                       NodeIndex v);

// Knot decision set for v. Covered v gets the single empty decision.
// Otherwise: uncovered nodes on other partitions (index order), then 2-edges
// without a node from v's partition (ordered by smallest member). When no
// candidate exists the result is the single empty decision.
std::vector<Edge> decisionSetKnot(const HyperGraph& graph, const DecisionState& state,
                                  NodeIndex v);

// Decision set as seen by the probability model: never empty; the bipartite
// "no candidate" case is the single empty decision.
std::vector<Edge> decisionSet(DecisionKind kind, const HyperGraph& graph,
                              const DecisionState& state, NodeIndex v);

// Applies decision d for node v: d becomes d ∪ {v}; an empty decision for an
// uncovered node creates the singleton {v}; a covered node leaves the matching
// unchanged. Throws ContractViolation if d is not in v's decision set.
DecisionState applyDecision(DecisionKind kind, const HyperGraph& graph, DecisionState state,
                            NodeIndex v, const Edge& d);

// Same without the decision-set membership check. For samplers that draw d
// from decisionSet().
DecisionState applyDecisionUnchecked(DecisionState state, NodeIndex v, const Edge& d);

// Nodes the model visits: all nodes (knot) or partition 0 (bipartite).
std::vector<NodeIndex> visitableNodes(DecisionKind kind, const HyperGraph& graph);
std::size_t numSteps(DecisionKind kind, const HyperGraph& graph);
bool isComplete(DecisionKind kind, const HyperGraph& graph, const DecisionState& state);

// Whether some complete path of the model ends in `matching`. Knot model:
// every node covered, and if singletons exist they share one partition p and
// every 2-edge holds a node of p. Bipartite model: pairs across the two
// partitions, partition-0 nodes all covered, and a partition-0 singleton only
// when every partition-1 node is matched.
bool isReachableMatching(DecisionKind kind, const HyperGraph& graph, const Matching& matching);

// Rebuilds a state from its visit order and decisions, checking each decision.
DecisionState replay(DecisionKind kind, const HyperGraph& graph,
                     std::span<const NodeIndex> visitOrder, std::span<const Edge> decisions);

// Largest graph accepted by the exhaustive enumerators.
inline constexpr std::size_t kMaxEnumerationNodes = 12;

// All complete matchings reachable from the empty state, sorted.
// Throws UsageError above kMaxEnumerationNodes.
std::vector<Matching> enumerateMatchings(const HyperGraph& graph, DecisionKind kind);

// Number of distinct reachable (matching, visited set) states, including the
// empty initial state.
std::size_t countReachableStates(const HyperGraph& graph, DecisionKind kind);

}  // namespace knotmatch
