#include <random>

#include <gtest/gtest.h>

#include "esrs/lattice.hpp"
#include "esrs/oracle.hpp"
#include "support.hpp"

using namespace esrs;
using esrs::testing::expect_error;

TEST(Relation, FivePoiPrincipalIdealsAndCovers) {
  auto rel = esrs::testing::five_poi();
  EXPECT_EQ(principal_ideal(*rel, "q5"), (std::vector<PoiId>{"q1", "q4", "q5"}));
  EXPECT_EQ(principal_ideal(*rel, "q3"), (std::vector<PoiId>{"q2", "q3"}));
  EXPECT_EQ(principal_ideal(*rel, "q1"), (std::vector<PoiId>{"q1"}));
  EXPECT_EQ(rel->hasse_edge_count(), 3u);
  EXPECT_FALSE(rel->leq(rel->index_of("q1"), rel->index_of("q3")));
  EXPECT_TRUE(rel->leq(rel->index_of("q1"), rel->index_of("q5")));
}

TEST(Relation, TransitiveInputEdgesAreReduced) {
  auto rel = SurmiseRelation::build({"a", "b", "c"}, std::vector<IdEdge>{{"a", "b"}, {"b", "c"}, {"a", "c"}});
  EXPECT_EQ(rel.hasse_edge_count(), 2u);
  EXPECT_FALSE(rel.is_covering(0, 2));
  EXPECT_TRUE(rel.less(0, 2));
}

TEST(Relation, CycleIsRejectedWithItsMembers) {
  try {
    SurmiseRelation::build({"a", "b", "c"}, std::vector<IdEdge>{{"a", "b"}, {"b", "c"}, {"c", "a"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::cycle_detected);
    const std::string msg = e.what();
    EXPECT_NE(msg.find('a'), std::string::npos);
    EXPECT_NE(msg.find('c'), std::string::npos);
  }
}

TEST(Relation, BuildErrors) {
  expect_error(ErrorCode::empty_domain, [] { SurmiseRelation::build({}, std::vector<IdEdge>{}); });
  expect_error(ErrorCode::duplicate_item, [] { SurmiseRelation::build({"a", "a"}, std::vector<IdEdge>{}); });
  expect_error(ErrorCode::unknown_item, [] { SurmiseRelation::build({"a"}, std::vector<IdEdge>{{"a", "z"}}); });
  EXPECT_EQ(SurmiseRelation::build({"a"}, std::vector<IdEdge>{{"a", "a"}}).hasse_edge_count(), 0u);
}

TEST(Relation, StateValidity) {
  auto rel = esrs::testing::five_poi();
  EXPECT_TRUE(is_valid_state(*rel, rel->to_state({"q1", "q4"})));
  EXPECT_FALSE(is_valid_state(*rel, rel->to_state({"q4"})));
  EXPECT_TRUE(is_valid_state(*rel, rel->empty_state()));
  EXPECT_TRUE(is_valid_state(*rel, rel->full_state()));
  expect_error(ErrorCode::unknown_item, [&] { rel->to_state({"q9"}); });
  expect_error(ErrorCode::invalid_state, [&] { fringe(*rel, rel->to_state({"q5"})); });
}

TEST(Fringe, FivePoiExamples) {
  auto rel = esrs::testing::five_poi();
  auto f = [&](std::initializer_list<PoiId> k) { return rel->ids(fringe(*rel, rel->to_state(k))); };
  EXPECT_EQ(f({}), (std::vector<PoiId>{"q1", "q2"}));
  EXPECT_EQ(f({"q1"}), (std::vector<PoiId>{"q2", "q4"}));
  EXPECT_EQ(f({"q1", "q2"}), (std::vector<PoiId>{"q3", "q4"}));
  EXPECT_EQ(f({"q1", "q4"}), (std::vector<PoiId>{"q2", "q5"}));
  EXPECT_TRUE(f({"q1", "q2", "q3", "q4", "q5"}).empty());
}

TEST(Fringe, CountersTrackAdvances) {
  auto rel = esrs::testing::five_poi();
  FringeCounters c(*rel, rel->to_state({"q1"}));
  EXPECT_EQ(c.count(rel->index_of("q5")), 1u);
  c.advance(*rel, rel->index_of("q4"));
  EXPECT_EQ(c.count(rel->index_of("q5")), 0u);
  EXPECT_EQ(rel->ids(c.fringe()), (std::vector<PoiId>{"q2", "q5"}));
  expect_error(ErrorCode::not_in_fringe, [&] { c.advance(*rel, rel->index_of("q3")); });
}

TEST(Fringe, WellGradedChainPrefixesAreIdeals) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    auto p = esrs::testing::random_poset(rng, 8, 0.3);
    for (const auto& k : oracle::enumerate_ideals(p.rel)) {
      const auto chain = well_graded_chain(p.rel, k);
      ASSERT_EQ(chain.size(), k.size());
      ExplorationState s = p.rel.empty_state();
      for (std::size_t q : chain) {
        ASSERT_TRUE(fringe(p.rel, s).contains(q));
        s = s.with(q);
      }
      EXPECT_EQ(s, k);
    }
  }
}

TEST(CountIdeals, ChainProducts) {
  auto two_chains = SurmiseRelation::build({"a", "b", "c", "d", "e"},
                                           std::vector<IdEdge>{{"a", "b"}, {"b", "c"}, {"d", "e"}});
  EXPECT_EQ(count_ideals(two_chains), 12u);

  std::vector<PoiId> items;
  std::vector<IdEdge> edges;
  for (int c = 0; c < 5; ++c) {
    for (int i = 0; i < 3; ++i) items.push_back("c" + std::to_string(c) + "_" + std::to_string(i));
    edges.emplace_back(items[3 * c], items[3 * c + 1]);
    edges.emplace_back(items[3 * c + 1], items[3 * c + 2]);
  }
  EXPECT_EQ(count_ideals(SurmiseRelation::build(items, edges)), 1024u);

  std::vector<PoiId> anti;
  for (int i = 0; i < 10; ++i) anti.push_back("a" + std::to_string(i));
  EXPECT_EQ(count_ideals(SurmiseRelation::build(anti, std::vector<IdEdge>{})), 1024u);
}

TEST(CountIdeals, LargeNonChainComponentIsRefused) {
  std::vector<PoiId> items;
  std::vector<IdEdge> edges;
  for (int i = 0; i < 22; ++i) items.push_back("n" + std::to_string(100 + i));
  for (int i = 1; i < 22; ++i) edges.emplace_back(items[0], items[i]);  // a star, not a chain
  auto rel = SurmiseRelation::build(items, edges);
  expect_error(ErrorCode::component_too_large, [&] { count_ideals(rel); });
}

TEST(CountIdeals, LongChainIsClosedForm) {
  std::vector<PoiId> items;
  std::vector<IdEdge> edges;
  for (int i = 0; i < 60; ++i) items.push_back("n" + std::to_string(100 + i));
  for (int i = 0; i + 1 < 60; ++i) edges.emplace_back(items[i], items[i + 1]);
  EXPECT_EQ(count_ideals(SurmiseRelation::build(items, edges)), 61u);
}

TEST(CountIdeals, MatchesOracleOnRandomPosets) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 60; ++t) {
    auto p = esrs::testing::random_poset(rng, 1 + t % 10, 0.25);
    EXPECT_EQ(count_ideals(p.rel), oracle::enumerate_ideals(p.rel).size());
  }
}

TEST(Relation, ClosureMatchesFloydWarshall) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 80; ++t) {
    auto p = esrs::testing::random_poset(rng, 2 + t % 11, 0.3);
    const auto fw = esrs::testing::floyd_warshall(p.items, p.edges);
    for (std::size_t a = 0; a < p.items.size(); ++a)
      for (std::size_t b = 0; b < p.items.size(); ++b)
        ASSERT_EQ(p.rel.leq(p.rel.index_of(p.items[a]), p.rel.index_of(p.items[b])), fw[a][b]);
  }
}

TEST(Relation, HasseIsTransitiveReduction) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 60; ++t) {
    auto p = esrs::testing::random_poset(rng, 9, 0.35);
    const auto& r = p.rel;
    for (std::size_t a = 0; a < r.size(); ++a)
      for (std::size_t b = 0; b < r.size(); ++b) {
        bool cover = r.less(a, b);
        for (std::size_t c = 0; c < r.size() && cover; ++c)
          if (r.less(a, c) && r.less(c, b)) cover = false;
        ASSERT_EQ(r.is_covering(a, b), cover);
      }
  }
}

TEST(Relation, WithEdgeRejectsReverse) {
  auto rel = esrs::testing::five_poi();
  expect_error(ErrorCode::cycle_detected, [&] { rel->with_edge(rel->index_of("q5"), rel->index_of("q1")); });
  auto same = rel->with_edge(rel->index_of("q1"), rel->index_of("q5"));
  EXPECT_EQ(same.hasse_edge_count(), 3u);
  auto more = rel->with_edge(rel->index_of("q3"), rel->index_of("q5"));
  EXPECT_TRUE(more.less(more.index_of("q2"), more.index_of("q5")));
  EXPECT_TRUE(more.less(more.index_of("q3"), more.index_of("q5")));
}

TEST(States, CanonicalKeyOrder) {
  auto rel = esrs::testing::five_poi();
  EXPECT_EQ(rel->key(rel->to_state({"q4", "q1"})), "q1,q4");
  EXPECT_TRUE(canonical_less(rel->to_state({"q1"}), rel->to_state({"q1", "q2"})));
  EXPECT_TRUE(canonical_less(rel->to_state({"q1", "q2"}), rel->to_state({"q1", "q4"})));
  EXPECT_TRUE(canonical_less(rel->empty_state(), rel->to_state({"q1"})));
}
