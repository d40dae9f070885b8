#include <doctest.h>

#include <random>

#include "knotmatch/errors.hpp"
#include "knotmatch/metrics.hpp"
#include "oracles.hpp"

using namespace knotmatch;

namespace {

// Random complete knot matching on a random 4-partite graph.
Matching randomMatching(std::mt19937_64& rng, std::size_t n) {
  std::vector<int> part(n);
  for (auto& p : part) p = static_cast<int>(rng() % 4);
  const HyperGraph g(4, part);
  DecisionState s(n);
  std::vector<NodeIndex> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeIndex>(i);
  std::shuffle(order.begin(), order.end(), rng);
  for (NodeIndex v : order) {
    const auto d = decisionSet(DecisionKind::knot, g, s, v);
    s = applyDecision(DecisionKind::knot, g, s, v, d[rng() % d.size()]);
  }
  return s.matching();
}

}  // namespace

TEST_CASE("accuracy counts exact edges") {
  const Matching truth({Edge{0, 1}, Edge{2, 3}, Edge{4}, Edge{5, 6, 7}});
  CHECK(accuracy(truth, truth) == 1.0);
  CHECK(accuracy(Matching({Edge{0, 1}, Edge{2, 3}, Edge{4}, Edge{5, 6}, Edge{7}}), truth) == doctest::Approx(0.75));
  CHECK(accuracy(Matching({Edge{0, 2}, Edge{1, 3}}), Matching({Edge{0, 1}, Edge{2, 3}})) == 0.0);
  CHECK(accuracy(Matching(), Matching()) == 1.0);
  CHECK(correctEdges(truth, truth) == 4);
}

TEST_CASE("per-node Jaccard values") {
  CHECK(nodeJaccard(Edge{0}, Edge{0, 1, 2}) == doctest::Approx(1.0 / 3.0));
  CHECK(nodeJaccard(Edge{0, 1, 2}, Edge{0, 3, 4}) == doctest::Approx(1.0 / 5.0));
  CHECK(nodeJaccard(Edge{0, 1}, Edge{0, 1}) == 1.0);
  const Matching a({Edge{0, 1, 2}});
  const Matching b({Edge{0}, Edge{1}, Edge{2}});
  CHECK(jaccardIndex(b, a) == doctest::Approx(1.0 / 3.0));
  CHECK(jaccardIndex(Matching(), Matching()) == 1.0);
  CHECK_THROWS_AS(jaccardIndex(Matching({Edge{0, 1}}), a), ContractViolation);
}

TEST_CASE("per-node Jaccard floor by enumeration over edge pairs") {
  // Node 0 shared; the rest drawn from distinct fresh nodes or shared ones.
  double floor = 1.0;
  const std::vector<Edge> pool{Edge{0}, Edge{0, 1}, Edge{0, 2}, Edge{0, 3}, Edge{0, 1, 2}, Edge{0, 1, 3},
                               Edge{0, 3, 4}, Edge{0, 2, 4}, Edge{0, 4, 5}};
  for (const auto& a : pool) {
    for (const auto& b : pool) {
      const double j = nodeJaccard(a, b);
      CHECK(j == doctest::Approx(nodeJaccard(b, a)));
      floor = std::min(floor, j);
    }
  }
  CHECK(floor == doctest::Approx(0.2));
}

TEST_CASE("metric identities on random matchings") {
  std::mt19937_64 rng(61);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng() % 12;
    const auto m = randomMatching(rng, n);
    CHECK(accuracy(m, m) == 1.0);
    CHECK(jaccardIndex(m, m) == 1.0);
    const auto other = randomMatching(rng, n);
    bool sameCover = other.coveredNodeCount() == n;
    if (sameCover) {
      const double j = jaccardIndex(other, m);
      CHECK(j >= 0.2 - 1e-12);
      CHECK(j <= 1.0);
      CHECK(j == doctest::Approx(jaccardIndex(m, other)));
    }
  }
}

TEST_CASE("adding a correct edge never lowers accuracy") {
  const Matching truth({Edge{0, 1}, Edge{2, 3}, Edge{4, 5}});
  const Matching partial({Edge{0, 1}, Edge{2}, Edge{3}, Edge{4}, Edge{5}});
  const Matching better({Edge{0, 1}, Edge{2, 3}, Edge{4}, Edge{5}});
  CHECK(accuracy(better, truth) >= accuracy(partial, truth));
}

TEST_CASE("board evaluation and aggregate accuracy") {
  const Matching truth({Edge{0, 1}, Edge{2}});
  const Matching wrong({Edge{0}, Edge{1}, Edge{2}});
  const std::vector<Matching> ms{truth, wrong};
  const std::vector<double> ws{0.75, 0.25};
  const auto post = MatchingPosterior::aggregate(ms, ws);
  const auto r = evaluateBoard("b", post, truth, truth);
  CHECK(r.accuracy == 1.0);
  CHECK(r.trueEdges == 2);
  CHECK(r.correct == 2);
  CHECK(r.jaccardMax == 1.0);
  // wrong: nodes 0 and 1 score 1/2, node 2 scores 1.
  CHECK(r.jaccardMin == doctest::Approx(2.0 / 3.0));
  CHECK(r.jaccardMean == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
  CHECK(r.jaccardWeightedMean == doctest::Approx(0.75 + 0.25 * 2.0 / 3.0));
  const auto s = evaluateBoard("c", post, wrong, truth);
  CHECK(s.correct == 1);
  const std::vector<EvalReport> reports{r, s};
  CHECK(aggregateAccuracy(reports) == doctest::Approx(3.0 / 4.0));
}
