#include "knotmatch/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <utility>

#include "knotmatch/errors.hpp"

namespace knotmatch {

HyperGraph::HyperGraph(int numPartitions, std::vector<int> partitionOf)
    : numPartitions_(numPartitions), partitionOf_(std::move(partitionOf)) {
  if (numPartitions_ < 1) throw ContractViolation("graph needs at least one partition");
  for (int p : partitionOf_) {
    if (p < 0 || p >= numPartitions_) {
      throw ContractViolation("node partition " + std::to_string(p) + " outside [0, " +
                              std::to_string(numPartitions_) + ")");
    }
  }
}

void HyperGraph::setSortKeys(std::vector<double> keys) {
  if (keys.size() != partitionOf_.size()) throw ContractViolation("one sort key per node required");
  sortKeys_ = std::move(keys);
}

// ---------------------------------------------------------------------------
// Edge

Edge::Edge(std::initializer_list<NodeIndex> nodes)
    : Edge(std::span<const NodeIndex>(nodes.begin(), nodes.size())) {}

Edge::Edge(std::span<const NodeIndex> nodes) {
  if (nodes.size() > kMaxEdgeSize) {
    throw ContractViolation("edge with " + std::to_string(nodes.size()) + " members exceeds " +
                            std::to_string(kMaxEdgeSize));
  }
  std::copy(nodes.begin(), nodes.end(), nodes_.begin());
  size_ = static_cast<std::uint8_t>(nodes.size());
  std::sort(nodes_.begin(), nodes_.begin() + size_);
  if (std::adjacent_find(nodes_.begin(), nodes_.begin() + size_) != nodes_.begin() + size_) {
    throw ContractViolation("edge lists a node twice");
  }
}

bool Edge::contains(NodeIndex v) const { return std::find(begin(), end(), v) != end(); }

Edge Edge::with(NodeIndex v) const {
  if (size_ == kMaxEdgeSize) throw ContractViolation("edge is already saturated");
  if (contains(v)) throw ContractViolation("node already in edge");
  Edge out = *this;
  std::size_t i = size_;
  while (i > 0 && out.nodes_[i - 1] > v) {
    out.nodes_[i] = out.nodes_[i - 1];
    --i;
  }
  out.nodes_[i] = v;
  ++out.size_;
  return out;
}

Edge Edge::without(NodeIndex v) const {
  Edge out;
  for (NodeIndex u : *this) {
    if (u != v) out.nodes_[out.size_++] = u;
  }
  return out;
}

bool Edge::operator==(const Edge& other) const {
  return std::equal(begin(), end(), other.begin(), other.end());
}

std::strong_ordering Edge::operator<=>(const Edge& other) const {
  return std::lexicographical_compare_three_way(begin(), end(), other.begin(), other.end());
}

std::string Edge::toString() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < size_; ++i) os << (i ? "," : "") << nodes_[i];
  os << '}';
  return os.str();
}

// ---------------------------------------------------------------------------
// Matching

Matching::Matching(std::vector<Edge> edges) : edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end());
  std::vector<NodeIndex> seen;
  for (const Edge& e : edges_) {
    if (e.empty()) throw ContractViolation("matching contains an empty edge");
    seen.insert(seen.end(), e.begin(), e.end());
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw ContractViolation("matching edges are not disjoint");
  }
}

bool Matching::contains(const Edge& e) const {
  return std::binary_search(edges_.begin(), edges_.end(), e);
}

const Edge* Matching::edgeContaining(NodeIndex v) const {
  for (const Edge& e : edges_) {
    if (e.contains(v)) return &e;
  }
  return nullptr;
}

std::size_t Matching::coveredNodeCount() const {
  std::size_t n = 0;
  for (const Edge& e : edges_) n += e.size();
  return n;
}

std::string Matching::toString() const {
  std::string out = "{";
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (i) out += ',';
    out += edges_[i].toString();
  }
  return out + "}";
}

void validateMatching(const HyperGraph& graph, const Matching& matching,
                      std::size_t maxEdgeSize) {
  for (const Edge& e : matching.edges()) {
    if (e.size() < 1 || e.size() > maxEdgeSize) {
      throw ContractViolation("edge " + e.toString() + " has invalid cardinality");
    }
    std::vector<int> parts;
    for (NodeIndex v : e) {
      if (v < 0 || static_cast<std::size_t>(v) >= graph.size()) {
        throw ContractViolation("edge " + e.toString() + " references unknown node");
      }
      parts.push_back(graph.partition(v));
    }
    std::sort(parts.begin(), parts.end());
    if (std::adjacent_find(parts.begin(), parts.end()) != parts.end()) {
      throw ContractViolation("edge " + e.toString() + " has two nodes in one partition");
    }
  }
}

// ---------------------------------------------------------------------------
// DecisionState

DecisionState::DecisionState(std::size_t numNodes) : edgeOf_(numNodes, -1), visited_(numNodes, 0) {}

Matching DecisionState::matching() const { return Matching(edges_); }

std::vector<NodeIndex> DecisionState::matchingLabels() const {
  std::vector<NodeIndex> labels(edgeOf_.size(), -1);
  for (std::size_t v = 0; v < edgeOf_.size(); ++v) {
    if (edgeOf_[v] >= 0) labels[v] = edges_[static_cast<std::size_t>(edgeOf_[v])].front();
  }
  return labels;
}

DecisionState applyDecisionUnchecked(DecisionState state, NodeIndex v, const Edge& d) {
  const auto vi = static_cast<std::size_t>(v);
  state.visited_[vi] = 1;
  state.visitOrder_.push_back(v);
  state.decisions_.push_back(d);
  if (state.edgeOf_[vi] >= 0) return state;
  if (d.empty()) {
    state.edgeOf_[vi] = static_cast<int>(state.edges_.size());
    state.edges_.push_back(Edge{v});
  } else if (d.size() == 1) {
    const int idx = static_cast<int>(state.edges_.size());
    state.edges_.push_back(d.with(v));
    state.edgeOf_[vi] = idx;
    state.edgeOf_[static_cast<std::size_t>(d[0])] = idx;
  } else {
    const int idx = state.edgeOf_[static_cast<std::size_t>(d[0])];
    auto& target = state.edges_[static_cast<std::size_t>(idx)];
    target = target.with(v);
    state.edgeOf_[vi] = idx;
  }
  return state;
}

// ---------------------------------------------------------------------------
// Decision sets

std::vector<Edge> decisionSetBipartite(const HyperGraph& graph, const DecisionState& state,
                                       NodeIndex v) {
  if (graph.numPartitions() != 2) throw UsageError("bipartite decision set needs K = 2");
  if (state.isVisited(v)) {
    throw UsageError("node " + std::to_string(v) + " was already visited");
  }
  std::vector<Edge> out;
  const int own = graph.partition(v);
  for (std::size_t u = 0; u < graph.size(); ++u) {
    const auto ui = static_cast<NodeIndex>(u);
    if (graph.partition(ui) != own && !state.isCovered(ui)) out.push_back(Edge{ui});
  }
  return out;
}

std::vector<Edge> decisionSetKnot(const HyperGraph& graph, const DecisionState& state,
                                  NodeIndex v) {
  if (state.isCovered(v)) return {Edge{}};
  std::vector<Edge> out;
  const int own = graph.partition(v);
  for (std::size_t u = 0; u < graph.size(); ++u) {
    const auto ui = static_cast<NodeIndex>(u);
    if (ui != v && !state.isCovered(ui) && graph.partition(ui) != own) out.push_back(Edge{ui});
  }
  std::vector<Edge> pairs;
  for (const Edge& e : state.edges()) {
    if (e.size() != 2) continue;
    if (graph.partition(e[0]) == own || graph.partition(e[1]) == own) continue;
    pairs.push_back(e);
  }
  std::sort(pairs.begin(), pairs.end());
  out.insert(out.end(), pairs.begin(), pairs.end());
  if (out.empty()) out.push_back(Edge{});
  return out;
}

std::vector<Edge> decisionSet(DecisionKind kind, const HyperGraph& graph,
                              const DecisionState& state, NodeIndex v) {
  if (kind == DecisionKind::knot) return decisionSetKnot(graph, state, v);
  auto out = decisionSetBipartite(graph, state, v);
  if (out.empty()) out.push_back(Edge{});
  return out;
}

DecisionState applyDecision(DecisionKind kind, const HyperGraph& graph, DecisionState state,
                            NodeIndex v, const Edge& d) {
  if (v < 0 || static_cast<std::size_t>(v) >= graph.size()) {
    throw ContractViolation("node " + std::to_string(v) + " not in graph");
  }
  if (state.isVisited(v)) throw ContractViolation("node " + std::to_string(v) + " already visited");
  if (kind == DecisionKind::bipartite && graph.partition(v) != 0) {
    throw ContractViolation("bipartite model visits partition 0 only");
  }
  const auto options = decisionSet(kind, graph, state, v);
  if (std::find(options.begin(), options.end(), d) == options.end()) {
    throw ContractViolation("decision " + d.toString() + " is not in the decision set of node " +
                            std::to_string(v));
  }
  return applyDecisionUnchecked(std::move(state), v, d);
}

std::vector<NodeIndex> visitableNodes(DecisionKind kind, const HyperGraph& graph) {
  std::vector<NodeIndex> out;
  for (std::size_t v = 0; v < graph.size(); ++v) {
    const auto vi = static_cast<NodeIndex>(v);
    if (kind == DecisionKind::knot || graph.partition(vi) == 0) out.push_back(vi);
  }
  return out;
}

std::size_t numSteps(DecisionKind kind, const HyperGraph& graph) {
  if (kind == DecisionKind::knot) return graph.size();
  return visitableNodes(kind, graph).size();
}

bool isComplete(DecisionKind kind, const HyperGraph& graph, const DecisionState& state) {
  return state.numVisited() == numSteps(kind, graph);
}

bool isReachableMatching(DecisionKind kind, const HyperGraph& graph, const Matching& matching) {
  try {
    validateMatching(graph, matching, kind == DecisionKind::knot ? kMaxEdgeSize : 2);
  } catch (const ContractViolation&) {
    return false;
  }
  if (kind == DecisionKind::bipartite) {
    if (graph.numPartitions() != 2) return false;
    bool singleton = false;
    for (const Edge& e : matching.edges()) {
      if (e.size() == 1) {
        if (graph.partition(e[0]) != 0) return false;
        singleton = true;
      }
    }
    for (std::size_t v = 0; v < graph.size(); ++v) {
      const auto vi = static_cast<NodeIndex>(v);
      const bool covered = matching.edgeContaining(vi) != nullptr;
      if (graph.partition(vi) == 0 && !covered) return false;
      if (graph.partition(vi) == 1 && singleton && !covered) return false;
    }
    return true;
  }
  if (matching.coveredNodeCount() != graph.size()) return false;
  int singletonPartition = -1;
  for (const Edge& e : matching.edges()) {
    if (e.size() != 1) continue;
    const int p = graph.partition(e[0]);
    if (singletonPartition >= 0 && p != singletonPartition) return false;
    singletonPartition = p;
  }
  if (singletonPartition < 0) return true;
  for (const Edge& e : matching.edges()) {
    if (e.size() == 2 && graph.partition(e[0]) != singletonPartition &&
        graph.partition(e[1]) != singletonPartition) {
      return false;
    }
  }
  return true;
}

DecisionState replay(DecisionKind kind, const HyperGraph& graph,
                     std::span<const NodeIndex> visitOrder, std::span<const Edge> decisions) {
  if (visitOrder.size() != decisions.size()) {
    throw ContractViolation("visit order and decision sequence differ in length");
  }
  DecisionState state(graph.size());
  for (std::size_t r = 0; r < visitOrder.size(); ++r) {
    state = applyDecision(kind, graph, std::move(state), visitOrder[r], decisions[r]);
  }
  return state;
}

// ---------------------------------------------------------------------------
// Enumeration

namespace {

using StateKey = std::pair<std::vector<NodeIndex>, std::vector<char>>;

StateKey keyOf(const DecisionState& s) {
  std::vector<char> visited(s.numNodes());
  for (std::size_t v = 0; v < s.numNodes(); ++v) visited[v] = s.isVisited(static_cast<NodeIndex>(v));
  return {s.matchingLabels(), std::move(visited)};
}

template <class OnFinal>
std::size_t explore(const HyperGraph& graph, DecisionKind kind, OnFinal&& onFinal) {
  if (graph.size() > kMaxEnumerationNodes) {
    throw UsageError("exhaustive enumeration refused for " + std::to_string(graph.size()) +
                     " nodes (limit " + std::to_string(kMaxEnumerationNodes) + ")");
  }
  const auto nodes = visitableNodes(kind, graph);
  std::set<StateKey> seen;
  std::vector<DecisionState> stack{DecisionState(graph.size())};
  seen.insert(keyOf(stack.back()));
  while (!stack.empty()) {
    DecisionState s = std::move(stack.back());
    stack.pop_back();
    if (s.numVisited() == nodes.size()) {
      onFinal(s);
      continue;
    }
    for (NodeIndex v : nodes) {
      if (s.isVisited(v)) continue;
      for (const Edge& d : decisionSet(kind, graph, s, v)) {
        DecisionState next = applyDecisionUnchecked(s, v, d);
        if (seen.insert(keyOf(next)).second) stack.push_back(std::move(next));
      }
    }
  }
  return seen.size();
}

}  // namespace

std::vector<Matching> enumerateMatchings(const HyperGraph& graph, DecisionKind kind) {
  std::set<Matching> finals;
  explore(graph, kind, [&](const DecisionState& s) { finals.insert(s.matching()); });
  return {finals.begin(), finals.end()};
}

std::size_t countReachableStates(const HyperGraph& graph, DecisionKind kind) {
  return explore(graph, kind, [](const DecisionState&) {});
}

}  // namespace knotmatch
