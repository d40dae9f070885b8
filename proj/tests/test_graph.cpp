#include <doctest.h>

#include <random>
#include <set>

#include "knotmatch/errors.hpp"
#include "knotmatch/graph.hpp"
#include "oracles.hpp"

using namespace knotmatch;

namespace {

// Six nodes alternating between two partitions: 0, 2, 4 on one side.
HyperGraph sixNodeBipartite() { return HyperGraph(2, {0, 1, 0, 1, 0, 1}); }

HyperGraph fourByOne() { return HyperGraph(4, {0, 1, 2, 3}); }

}  // namespace

TEST_CASE("bipartite decision set on an empty matching lists the other side") {
  const auto g = sixNodeBipartite();
  const auto d = decisionSetBipartite(g, DecisionState(6), 2);
  CHECK(d == std::vector<Edge>{Edge{1}, Edge{3}, Edge{5}});
}

TEST_CASE("bipartite decision set shrinks after a pairing") {
  const auto g = sixNodeBipartite();
  auto s = applyDecision(DecisionKind::bipartite, g, DecisionState(6), 2, Edge{1});
  CHECK(decisionSetBipartite(g, s, 0) == std::vector<Edge>{Edge{3}, Edge{5}});
}

TEST_CASE("bipartite decision set is empty when the other side is covered") {
  const HyperGraph g(2, {0, 1, 0});
  auto s = applyDecision(DecisionKind::bipartite, g, DecisionState(3), 0, Edge{1});
  CHECK(decisionSetBipartite(g, s, 2).empty());
  CHECK(decisionSet(DecisionKind::bipartite, g, s, 2) == std::vector<Edge>{Edge{}});
  CHECK_THROWS_AS(decisionSetBipartite(g, s, 0), UsageError);
}

TEST_CASE("knot decision set for the first node lists every other-partition node") {
  const HyperGraph g(4, {0, 0, 1, 1, 2, 2, 3, 3});
  const auto d = decisionSetKnot(g, DecisionState(8), 0);
  CHECK(d.size() == 6);
  for (const auto& e : d) CHECK(e.size() == 1);
}

TEST_CASE("covered node only has the empty decision") {
  const auto g = fourByOne();
  auto s = applyDecision(DecisionKind::knot, g, DecisionState(4), 0, Edge{1});
  CHECK(decisionSetKnot(g, s, 1) == std::vector<Edge>{Edge{}});
}

TEST_CASE("knot decision set offers pairs before growing 2-edges") {
  const auto g = fourByOne();
  auto s = applyDecision(DecisionKind::knot, g, DecisionState(4), 0, Edge{1});
  CHECK(decisionSetKnot(g, s, 2) == std::vector<Edge>{Edge{3}, Edge{0, 1}});
}

TEST_CASE("walk through forming a triple leaves a singleton") {
  const auto g = fourByOne();
  DecisionState s(4);
  s = applyDecision(DecisionKind::knot, g, s, 0, Edge{1});
  CHECK(s.matching() == Matching({Edge{0, 1}}));
  s = applyDecision(DecisionKind::knot, g, s, 2, Edge{0, 1});
  CHECK(s.matching() == Matching({Edge{0, 1, 2}}));
  s = applyDecision(DecisionKind::knot, g, s, 1, Edge{});
  CHECK(s.matching() == Matching({Edge{0, 1, 2}}));
  CHECK(decisionSetKnot(g, s, 3) == std::vector<Edge>{Edge{}});
  s = applyDecision(DecisionKind::knot, g, s, 3, Edge{});
  CHECK(s.matching() == Matching({Edge{0, 1, 2}, Edge{3}}));
  CHECK(isComplete(DecisionKind::knot, g, s));
}

TEST_CASE("decisions outside the decision set are rejected") {
  const auto g = fourByOne();
  auto s = applyDecision(DecisionKind::knot, g, DecisionState(4), 0, Edge{1});
  CHECK_THROWS_AS(applyDecision(DecisionKind::knot, g, s, 2, Edge{1}), ContractViolation);
  CHECK_THROWS_AS(applyDecision(DecisionKind::knot, g, s, 0, Edge{}), ContractViolation);
}

TEST_CASE("matching rejects overlapping edges and validation checks partitions") {
  CHECK_THROWS_AS(Matching({Edge{0, 1}, Edge{1, 2}}), ContractViolation);
  const HyperGraph g(2, {0, 0, 1});
  CHECK_THROWS_AS(validateMatching(g, Matching({Edge{0, 1}})), ContractViolation);
  CHECK_NOTHROW(validateMatching(g, Matching({Edge{0, 2}, Edge{1}})));
}

TEST_CASE("enumeration counts") {
  CHECK(enumerateMatchings(fourByOne(), DecisionKind::knot).size() == 7);
  CHECK(enumerateMatchings(HyperGraph(1, {0}), DecisionKind::knot).size() == 1);
  const HyperGraph twoByTwo(2, {0, 0, 1, 1});
  CHECK(countReachableStates(twoByTwo, DecisionKind::bipartite) == 7);
  CHECK(enumerateMatchings(twoByTwo, DecisionKind::bipartite).size() == 2);
  CHECK_THROWS_AS(enumerateMatchings(HyperGraph(4, std::vector<int>(13, 0)), DecisionKind::knot),
                  UsageError);
}

TEST_CASE("enumeration matches brute-force path end states") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    std::vector<int> part(n);
    const bool bip = trial % 3 == 0;
    for (auto& p : part) p = static_cast<int>(rng() % (bip ? 2 : 4));
    const int k = bip ? 2 : 4;
    const auto kind = bip ? DecisionKind::bipartite : DecisionKind::knot;
    const HyperGraph g(k, part);
    const auto levels = oracle::reachableLevels(part, kind);
    std::set<oracle::Canon> ends;
    for (const auto& s : levels.back()) ends.insert(s.canon());
    std::set<oracle::Canon> got;
    for (const auto& m : enumerateMatchings(g, kind)) got.insert(oracle::canonOf(m));
    CHECK(got == ends);
    std::size_t states = 0;
    for (const auto& l : levels) states += l.size();
    CHECK(countReachableStates(g, kind) == states);
  }
}

TEST_CASE("reachability test agrees with enumeration on every covering matching") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 1 + rng() % 6;
    const bool bip = trial % 2 == 0;
    std::vector<int> part(n);
    for (auto& p : part) p = static_cast<int>(rng() % (bip ? 2 : 4));
    const auto kind = bip ? DecisionKind::bipartite : DecisionKind::knot;
    const HyperGraph g(bip ? 2 : 4, part);
    std::set<oracle::Canon> reachable;
    for (const auto& m : enumerateMatchings(g, kind)) reachable.insert(oracle::canonOf(m));
    for (const auto& c : oracle::allCoveringMatchings(part, bip ? 2 : 3)) {
      CHECK(isReachableMatching(kind, g, oracle::toMatching(c)) == (reachable.count(c) == 1));
    }
  }
}

TEST_CASE("oracle decision sets agree with the library along random paths") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 9;
    std::vector<int> part(n);
    for (auto& p : part) p = static_cast<int>(rng() % 4);
    const HyperGraph g(4, part);
    DecisionState s(n);
    oracle::State o(n);
    std::vector<NodeIndex> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeIndex>(i);
    std::shuffle(order.begin(), order.end(), rng);
    for (NodeIndex v : order) {
      const auto lib = decisionSet(DecisionKind::knot, g, s, v);
      const auto ref = oracle::decisions(part, DecisionKind::knot, o, v);
      REQUIRE(lib.size() == ref.size());
      for (std::size_t j = 0; j < lib.size(); ++j) CHECK(oracle::Nodes(lib[j].begin(), lib[j].end()) == ref[j]);
      const std::size_t pick = rng() % lib.size();
      s = applyDecision(DecisionKind::knot, g, s, v, lib[pick]);
      o = oracle::apply(o, v, ref[pick]);
    }
    CHECK(oracle::canonOf(s.matching()) == o.canon());
    validateMatching(g, s.matching());
    for (const auto& e : s.edges()) CHECK(e.size() <= kMaxEdgeSize);
    const auto again = replay(DecisionKind::knot, g, s.visitOrder(), s.decisions());
    CHECK(again.matching() == s.matching());
  }
}
