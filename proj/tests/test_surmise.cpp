#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "esrs/oracle.hpp"
#include "esrs/surmise.hpp"
#include "support.hpp"

using namespace esrs;
using esrs::testing::expect_error;

namespace {

std::vector<Trajectory> repeat(const std::vector<PoiId>& seq, std::size_t times, const std::string& prefix = "u") {
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < times; ++i) out.push_back(make_trajectory(prefix + std::to_string(i), seq));
  return out;
}

CandidateEdge edge(PoiId a, PoiId b, double c) {
  CandidateEdge e;
  e.a = std::move(a);
  e.b = std::move(b);
  e.confidence = c;
  return e;
}

const CandidateEdge& find(const std::vector<CandidateEdge>& v, const PoiId& a, const PoiId& b) {
  for (const auto& e : v)
    if (e.a == a && e.b == b) return e;
  throw std::runtime_error("edge not found");
}

}  // namespace

TEST(Timestamps, Iso8601) {
  EXPECT_EQ(parse_iso8601("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(parse_iso8601("2024-03-01T12:30:00Z"), 1709296200);
  EXPECT_EQ(parse_iso8601("2024-03-01T14:30:00+02:00"), 1709296200);
  expect_error(ErrorCode::parse_error, [] { parse_iso8601("yesterday"); });
}

TEST(Trajectories, MonotoneTimestamps) {
  Trajectory t{"u", {{"a", "2024-01-01T10:00:00Z", 100}, {"b", "2024-01-01T09:00:00Z", 50}}};
  expect_error(ErrorCode::non_monotone_timestamps, [&] { t.validate(); });
}

TEST(Binomial, TailProbabilities) {
  EXPECT_NEAR(binom_test(10, 10, 0.5), std::pow(0.5, 10), 1e-15);
  EXPECT_NEAR(binom_test(7, 10, 0.5), 176.0 / 1024.0, 1e-14);
  EXPECT_DOUBLE_EQ(binom_test(0, 5, 0.3), 1.0);
  // independent sum
  double s = 0.0;
  for (int i = 15; i <= 40; ++i) s += std::exp(std::lgamma(41) - std::lgamma(i + 1) - std::lgamma(41 - i) + i * std::log(0.6) + (40 - i) * std::log(0.4));
  EXPECT_NEAR(binom_test(15, 40, 0.6), s, 1e-12);
  expect_error(ErrorCode::invalid_argument, [] { binom_test(3, 2, 0.5); });
}

TEST(Mining, RevisitCountsBothDirections) {
  auto ts = repeat({"a", "b", "a"}, 1);
  const auto m = mine_pairs(ts, 1);
  ASSERT_EQ(m.pairs.size(), 2u);
  EXPECT_EQ(m.pairs[0].a, "a");
  EXPECT_EQ(m.pairs[1].a, "b");
  const auto strict = mine_pairs(ts, 1, PrecedencePolicy::first_before_first);
  ASSERT_EQ(strict.pairs.size(), 1u);
  EXPECT_EQ(strict.pairs[0].a, "a");
}

TEST(Mining, SupportAndConfidence) {
  auto ts = repeat({"a", "b"}, 30);
  auto more = repeat({"a", "c"}, 10, "v");
  ts.insert(ts.end(), more.begin(), more.end());
  const auto m = mine_pairs(ts, 20);
  ASSERT_EQ(m.pairs.size(), 1u);
  EXPECT_EQ(m.pairs[0].n_a, 40u);
  EXPECT_EQ(m.pairs[0].n_ab, 30u);
  EXPECT_DOUBLE_EQ(m.pairs[0].confidence, 0.75);
}

TEST(Cycles, MutualPairKeepsStrongerDirection) {
  auto out = resolve_cycles({edge("a", "b", 0.9), edge("b", "a", 0.7)});
  EXPECT_EQ(find(out, "a", "b").status, EdgeStatus::accepted);
  EXPECT_EQ(find(out, "b", "a").status, EdgeStatus::removed);
  out = resolve_cycles({edge("a", "b", 0.8), edge("b", "a", 0.8)});
  EXPECT_EQ(find(out, "a", "b").status, EdgeStatus::removed);
  EXPECT_EQ(find(out, "b", "a").status, EdgeStatus::removed);
}

TEST(Cycles, LongCycleKeepsBestEdge) {
  auto out = resolve_cycles({edge("a", "b", 0.9), edge("b", "c", 0.8), edge("c", "a", 0.7), edge("c", "d", 0.95)});
  EXPECT_EQ(find(out, "a", "b").status, EdgeStatus::accepted);
  EXPECT_EQ(find(out, "b", "c").status, EdgeStatus::removed);
  EXPECT_EQ(find(out, "c", "a").status, EdgeStatus::removed);
  EXPECT_EQ(find(out, "c", "a").reason, "cycle");
  EXPECT_EQ(find(out, "c", "d").status, EdgeStatus::accepted);
}

TEST(Inference, ThresholdsAndFlags) {
  auto ts = repeat({"a", "b"}, 40);
  auto mixed = repeat({"c", "d"}, 34, "m");
  auto other = repeat({"c"}, 6, "n");
  ts.insert(ts.end(), mixed.begin(), mixed.end());
  ts.insert(ts.end(), other.begin(), other.end());
  InferenceConfig cfg;
  const auto res = infer_surmise(ts, cfg);
  EXPECT_TRUE(res.relation.less(res.relation.index_of("a"), res.relation.index_of("b")));
  // c→d: ĉ = 0.85 is significant but below τ_high → flagged, not in the relation
  EXPECT_FALSE(res.relation.less(res.relation.index_of("c"), res.relation.index_of("d")));
  ASSERT_EQ(res.flags.size(), 1u);
  EXPECT_EQ(res.flags[0].a, "c");

  ReviewDecisions ok{{{"c", "d"}, EdgeStatus::accepted}};
  const auto reviewed = infer_surmise(ts, cfg, {}, ok);
  EXPECT_TRUE(reviewed.relation.less(reviewed.relation.index_of("c"), reviewed.relation.index_of("d")));
  EXPECT_TRUE(reviewed.flags.empty());
  ReviewDecisions no{{{"c", "d"}, EdgeStatus::removed}};
  EXPECT_EQ(find(infer_surmise(ts, cfg, {}, no).candidates, "c", "d").status, EdgeStatus::removed);
}

TEST(Inference, SymmetricCorpusYieldsNoEdge) {
  auto ts = repeat({"a", "b"}, 50);
  auto back = repeat({"b", "a"}, 50, "r");
  ts.insert(ts.end(), back.begin(), back.end());
  const auto res = infer_surmise(ts, InferenceConfig{});
  EXPECT_EQ(res.relation.hasse_edge_count(), 0u);
}

TEST(Inference, ItemsAbsentFromCorpusAreKept) {
  auto ts = repeat({"a", "b"}, 30);
  std::vector<PoiId> items{"a", "b", "z"};
  const auto res = infer_surmise(ts, InferenceConfig{}, items);
  EXPECT_EQ(res.relation.size(), 3u);
}

TEST(Inference, ConfigValidation) {
  InferenceConfig cfg;
  cfg.tau_high = 0.5;
  expect_error(ErrorCode::out_of_range, [&] { cfg.validate(); });
}

TEST(Incremental, AddingCrossEdge) {
  auto rel = esrs::testing::five_poi();
  std::vector<IdEdge> e{{"q3", "q5"}};
  const auto res = add_edges(*rel, e);
  const auto& r = res.relation;
  EXPECT_TRUE(r.less(r.index_of("q2"), r.index_of("q5")));
  EXPECT_TRUE(r.less(r.index_of("q3"), r.index_of("q5")));
  EXPECT_TRUE(r.is_covering(r.index_of("q3"), r.index_of("q5")));
  EXPECT_EQ(res.added.size(), 1u);

  std::vector<IdEdge> again{{"q1", "q5"}, {"q5", "q1"}, {"q1", "zz"}};
  const auto res2 = add_edges(*rel, again);
  EXPECT_EQ(res2.implied.size(), 1u);
  EXPECT_EQ(res2.conflicts.size(), 2u);
}

TEST(Incremental, SessionsAreUpdatedOrInvalidated) {
  auto rel = esrs::testing::five_poi();
  std::vector<FringeCounters> sessions{FringeCounters(*rel, rel->to_state({"q1", "q4"})),
                                       FringeCounters(*rel, rel->to_state({"q1", "q4", "q5"}))};
  std::vector<IdEdge> e{{"q3", "q5"}};
  const auto res = add_edges(*rel, e, sessions);
  // second session holds q5 without q3
  EXPECT_EQ(res.invalidated_sessions, (std::vector<std::size_t>{1}));
  EXPECT_EQ(res.relation.ids(sessions[0].fringe()), (std::vector<PoiId>{"q2"}));
}

TEST(Incremental, ClosureMatchesFloydWarshall) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 11;
    auto p = esrs::testing::random_poset(rng, n, 0.15);
    std::vector<IdEdge> all = p.edges;
    std::vector<IdEdge> delta;
    for (int k = 0; k < 6; ++k) {
      const auto a = p.items[rng() % n], b = p.items[rng() % n];
      if (a != b) delta.emplace_back(a, b);
    }
    std::vector<FringeCounters> sessions;
    for (const auto& k : oracle::enumerate_ideals(p.rel)) sessions.emplace_back(p.rel, k);
    const auto res = add_edges(p.rel, delta, sessions);
    all.insert(all.end(), res.added.begin(), res.added.end());
    const auto fw = esrs::testing::floyd_warshall(p.items, all);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        ASSERT_EQ(res.relation.leq(res.relation.index_of(p.items[a]), res.relation.index_of(p.items[b])), fw[a][b]);
    for (const auto& c : res.conflicts) {
      // rejected only when it would close a cycle
      ASSERT_TRUE(res.relation.leq(res.relation.index_of(c.b), res.relation.index_of(c.a)));
    }
    std::set<std::size_t> bad(res.invalidated_sessions.begin(), res.invalidated_sessions.end());
    for (std::size_t s = 0; s < sessions.size(); ++s) {
      const bool valid = is_valid_state(res.relation, sessions[s].state());
      ASSERT_EQ(valid, bad.count(s) == 0);
      if (valid) ASSERT_EQ(sessions[s].fringe(), fringe(res.relation, sessions[s].state()));
    }
  }
}

TEST(Review, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "esrs_review_test.json").string();
  auto e = edge("a", "b", 0.8);
  e.status = EdgeStatus::flagged;
  std::vector<CandidateEdge> v{e};
  save_review_file(path, v);
  auto d = load_review_file(path);
  EXPECT_EQ(d.at({"a", "b"}), EdgeStatus::flagged);
  std::filesystem::remove(path);
  expect_error(ErrorCode::parse_error, [] { edge_status_from_string("maybe"); });
}
