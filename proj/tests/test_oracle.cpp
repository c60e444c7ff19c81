#include <random>

#include <gtest/gtest.h>

#include "esrs/blim.hpp"
#include "esrs/oracle.hpp"
#include "esrs/planner.hpp"
#include "support.hpp"

using namespace esrs;
using esrs::testing::expect_error;

TEST(Oracle, FivePoiHasTwelveIdeals) {
  auto rel = esrs::testing::five_poi();
  EXPECT_EQ(oracle::enumerate_ideals(*rel).size(), 12u);
}

TEST(Oracle, BudgetIsEnforced) {
  std::vector<PoiId> items;
  for (int i = 0; i < 21; ++i) items.push_back("i" + std::to_string(100 + i));
  auto rel = SurmiseRelation::build(items, std::vector<IdEdge>{});
  expect_error(ErrorCode::budget_exceeded, [&] { oracle::enumerate_ideals(rel); });
  expect_error(ErrorCode::budget_exceeded, [&] {
    oracle::brute_force_path(rel, rel.empty_state(), 1, [](std::size_t, const ExplorationState&) { return 0.0; });
  });
}

TEST(Oracle, BruteForceOnFivePoi) {
  auto rel = esrs::testing::five_poi();
  auto by_index = [](std::size_t q, const ExplorationState&) { return static_cast<double>(q + 1); };
  auto best = oracle::brute_force_path(*rel, rel->to_state({"q1"}), 2, by_index);
  EXPECT_EQ(rel->ids(std::span<const std::size_t>(best.path)), (std::vector<PoiId>{"q4", "q5"}));
  EXPECT_DOUBLE_EQ(best.value, 9.0);
  auto flat = [](std::size_t, const ExplorationState&) { return 1.0; };
  best = oracle::brute_force_path(*rel, rel->to_state({"q1"}), 2, flat);
  EXPECT_EQ(rel->ids(std::span<const std::size_t>(best.path)), (std::vector<PoiId>{"q2", "q3"}));
  best = oracle::brute_force_path(*rel, rel->full_state(), 3, flat);
  EXPECT_TRUE(best.path.empty());
}

TEST(Oracle, ExactPosteriorZeroEvidence) {
  auto rel = esrs::testing::five_poi();
  auto prior = StateDistribution::uniform(rel, oracle::enumerate_ideals(*rel));
  auto params = BlimParams::uniform(5, 0.0, 0.0);
  // r=1 on q5 with β=0 rules out every state without q5; r=0 on q1 with η=0 rules out the rest.
  ResponseVector r{{rel->index_of("q5"), true}, {rel->index_of("q1"), false}};
  expect_error(ErrorCode::zero_evidence, [&] { oracle::exact_posterior(prior, r, params); });
}

// Union/intersection closure and fringe characterisation on random posets.
TEST(Properties, IdealFamilyOnRandomPosets) {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 10;
    std::uniform_real_distribution<double> dens(0.0, 0.6);
    auto p = esrs::testing::random_poset(rng, n, dens(rng));
    const auto ideals = oracle::enumerate_ideals(p.rel);
    auto fast = enumerate_ideals_bounded(p.rel, 1u << 12);
    ASSERT_TRUE(fast.has_value());
    ASSERT_EQ(*fast, ideals);
    std::set<std::string> keys;
    for (const auto& k : ideals) keys.insert(p.rel.key(k));
    for (const auto& a : ideals) {
      for (const auto& b : ideals) {
        ASSERT_TRUE(keys.count(p.rel.key(ExplorationState(a.members() | b.members()))));
        ASSERT_TRUE(keys.count(p.rel.key(ExplorationState(a.members() & b.members()))));
      }
      const auto expect = oracle::extensions(p.rel, a);
      ASSERT_EQ(fringe(p.rel, a).indices(), expect);
    }
  }
}
