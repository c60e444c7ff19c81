#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "esrs/feedback.hpp"
#include "esrs/oracle.hpp"
#include "support.hpp"

using namespace esrs;
using esrs::testing::expect_error;

namespace {

Session fresh(std::shared_ptr<const SurmiseRelation> rel, const std::string& id = "s") {
  UserProfile p;
  p.user_id = "u";
  p.confirmed = rel->empty_state();
  p.prefs.assign(rel->size(), 0.5);
  return Session(id, rel, p, initial_prior(rel));
}

FeedbackParams params(std::size_t n) { return {BlimParams::uniform(n, 0.05, 0.10), 500}; }

FeedbackEvent visit(const PoiId& poi, bool high = true) {
  FeedbackEvent e;
  e.user_id = "u";
  e.poi = poi;
  e.engaged = true;
  e.high_confidence = high;
  return e;
}

}  // namespace

TEST(Signals, Classification) {
  auto c = classify_signal(DwellSignal{5});
  EXPECT_FALSE(c.engaged);
  c = classify_signal(DwellSignal{10});
  EXPECT_FALSE(c.engaged);  // strictly above θ_d
  c = classify_signal(DwellSignal{20});
  EXPECT_TRUE(c.engaged);
  EXPECT_FALSE(c.high_confidence);
  EXPECT_NEAR(*c.intensity, 1.0 / 3.0, 1e-12);
  c = classify_signal(DwellSignal{45});
  EXPECT_TRUE(c.high_confidence);
  EXPECT_DOUBLE_EQ(*c.intensity, 0.75);
  EXPECT_DOUBLE_EQ(*classify_signal(DwellSignal{200}).intensity, 1.0);
  c = classify_signal(CheckInSignal{});
  EXPECT_TRUE(c.engaged && c.high_confidence);
  c = classify_signal(RatingSignal{4.5, 5.0});
  EXPECT_DOUBLE_EQ(*c.intensity, 0.9);
  expect_error(ErrorCode::out_of_range, [] { classify_signal(RatingSignal{6, 5}); });
  expect_error(ErrorCode::out_of_range, [] { classify_signal(DwellSignal{-1}); });
  expect_error(ErrorCode::out_of_range, [] { classify_signal(DwellSignal{20}, {30, 10, 60}); });
}

TEST(Signals, NonEngagedEventsCarryNoIntensity) {
  const auto e = FeedbackEvent::from_signal("u", "q1", DwellSignal{3});
  EXPECT_FALSE(e.engaged);
  EXPECT_FALSE(e.intensity.has_value());
}

TEST(Feedback, GuardRejectsBlockedPoi) {
  auto rel = esrs::testing::five_poi();
  auto s = fresh(rel);
  const auto rec = process_event(s, visit("q4"), params(5));
  EXPECT_EQ(rec.kind, AuditKind::guard_rejected);
  EXPECT_NE(rec.message.find("q1"), std::string::npos);
  EXPECT_TRUE(s.confirmed().empty());
  EXPECT_EQ(s.profile().interactions, 1u);
}

TEST(Feedback, AdvanceThenIdempotentRepeat) {
  auto rel = esrs::testing::five_poi();
  auto s = fresh(rel);
  auto rec = process_event(s, visit("q1"), params(5));
  EXPECT_EQ(rec.kind, AuditKind::confirmed_advanced);
  EXPECT_EQ(rel->ids(s.confirmed()), (std::vector<PoiId>{"q1"}));
  EXPECT_EQ(rel->ids(s.counters().fringe()), (std::vector<PoiId>{"q2", "q4"}));
  rec = process_event(s, visit("q1"), params(5));
  EXPECT_EQ(rec.kind, AuditKind::already_confirmed);
  EXPECT_EQ(rel->ids(s.confirmed()), (std::vector<PoiId>{"q1"}));
  rec = process_event(s, visit("q4"), params(5));
  EXPECT_EQ(rec.kind, AuditKind::confirmed_advanced);
  EXPECT_EQ(rec.confirmed_before, (std::vector<PoiId>{"q1"}));
  EXPECT_EQ(rec.confirmed_after, (std::vector<PoiId>{"q1", "q4"}));
}

TEST(Feedback, LowConfidenceAndDisengagementOnlyTouchBeliefs) {
  auto rel = esrs::testing::five_poi();
  auto s = fresh(rel);
  const double before = s.distribution().probability(rel->to_state({"q1"}));
  auto rec = process_event(s, visit("q1", false), params(5));
  EXPECT_EQ(rec.kind, AuditKind::low_confidence);
  EXPECT_TRUE(s.confirmed().empty());
  EXPECT_GT(s.distribution().probability(rel->to_state({"q1"})), before);
  EXPECT_NEAR(*rec.pref_after, 0.5 + 0.1 * (1.0 - 0.5), 1e-12);

  auto e = visit("q1");
  e.engaged = false;
  e.high_confidence = false;
  rec = process_event(s, e, params(5));
  EXPECT_EQ(rec.kind, AuditKind::not_engaged);
  EXPECT_TRUE(s.confirmed().empty());
}

TEST(Feedback, IntensityDrivesEma) {
  auto rel = esrs::testing::five_poi();
  auto s = fresh(rel);
  auto e = FeedbackEvent::from_signal("u", "q1", RatingSignal{4.5, 5.0});
  const auto rec = process_event(s, e, params(5));
  EXPECT_NEAR(*rec.pref_after, 0.5 + 0.1 * (0.9 - 0.5), 1e-12);
}

TEST(Feedback, UnknownPoiAndMalformedEvents) {
  auto rel = esrs::testing::five_poi();
  auto s = fresh(rel);
  auto rec = process_event(s, visit("nowhere"), params(5));
  EXPECT_EQ(rec.kind, AuditKind::unknown_poi);
  EXPECT_EQ(s.profile().interactions, 0u);
  auto bad = visit("q1");
  bad.intensity = 1.7;
  rec = process_event(s, bad, params(5));
  EXPECT_EQ(rec.kind, AuditKind::not_engaged);
  EXPECT_TRUE(s.confirmed().empty());
  EXPECT_DOUBLE_EQ(s.profile().prefs[0], 0.5);
}

TEST(Feedback, ZeroEvidenceKeepsDistribution) {
  auto rel = esrs::testing::five_poi();
  UserProfile p;
  p.confirmed = rel->empty_state();
  p.prefs.assign(5, 0.5);
  Session s("s", rel, p, StateDistribution::point_mass(rel, rel->empty_state()));
  const auto rec = process_event(s, visit("q1"), {BlimParams::uniform(5, 0.0, 0.1), 10});
  EXPECT_TRUE(rec.zero_evidence);
  EXPECT_EQ(s.distribution().probability(rel->empty_state()), 1.0);
  EXPECT_EQ(rec.kind, AuditKind::confirmed_advanced);  // the guard only looks at the confirmed state
}

TEST(Feedback, AuditRecordJson) {
  auto rel = esrs::testing::five_poi();
  auto s = fresh(rel);
  const auto rec = process_event(s, visit("q4"), params(5));
  std::ostringstream out;
  write_audit_jsonl(out, rec);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j.at("kind"), "GuardRejected");
  EXPECT_EQ(j.at("poi"), "q4");
  EXPECT_TRUE(j.at("confirmed_after").empty());
  EXPECT_EQ(out.str().back(), '\n');
}

TEST(Feedback, RebindRelation) {
  auto rel = esrs::testing::five_poi();
  auto s = fresh(rel);
  process_event(s, visit("q1"), params(5));
  process_event(s, visit("q4"), params(5));
  auto stricter = std::make_shared<const SurmiseRelation>(rel->with_edge(rel->index_of("q3"), rel->index_of("q4")));
  EXPECT_FALSE(s.rebind_relation(stricter, 2));
  EXPECT_EQ(s.relation_version(), 0u);
  auto looser = std::make_shared<const SurmiseRelation>(rel->with_edge(rel->index_of("q3"), rel->index_of("q5")));
  EXPECT_TRUE(s.rebind_relation(looser, 3));
  EXPECT_EQ(s.relation_version(), 3u);
  EXPECT_EQ(looser->ids(s.counters().fringe()), (std::vector<PoiId>{"q2"}));
  EXPECT_NEAR(s.distribution().total(), 1.0, 1e-9);
  for (const auto& ws : s.distribution().support()) EXPECT_TRUE(is_valid_state(*looser, ws.state));
}

// Random event streams: the incremental fringe always equals the batch
// fringe and the confirmed state is always an ideal.
TEST(Feedback, IncrementalFringeUnderRandomStreams) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 200; ++t) {
    auto p = esrs::testing::random_poset(rng, 3 + rng() % 8, 0.3);
    auto rel = std::make_shared<const SurmiseRelation>(p.rel);
    auto s = fresh(rel);
    const auto fp = params(rel->size());
    for (int step = 0; step < 25; ++step) {
      auto e = visit(rel->id(rng() % rel->size()), rng() % 4 != 0);
      if (rng() % 5 == 0) e.engaged = false;
      if (!e.engaged) e.high_confidence = false;
      const auto before = s.confirmed();
      const auto rec = process_event(s, e, fp);
      ASSERT_TRUE(is_valid_state(*rel, s.confirmed()));
      ASSERT_EQ(s.counters().fringe(), fringe(*rel, s.confirmed()));
      ASSERT_TRUE(before.members().is_subset_of(s.confirmed().members()));
      if (rec.kind != AuditKind::confirmed_advanced) ASSERT_EQ(before, s.confirmed());
      else ASSERT_EQ(s.confirmed().size(), before.size() + 1);
    }
  }
}
