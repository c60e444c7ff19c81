#include <cmath>

#include <gtest/gtest.h>

#include "esrs/user_model.hpp"
#include "support.hpp"

using namespace esrs;
using esrs::testing::expect_error;

TEST(UserModel, EmaStep) {
  UserProfile p;
  p.prefs = {0.8, 0.5};
  ema_update(p, 0, 0.9);
  EXPECT_NEAR(p.prefs[0], 0.81, 1e-12);
  ema_update(p, 1, 0.0);
  EXPECT_NEAR(p.prefs[1], 0.45, 1e-12);
  expect_error(ErrorCode::out_of_range, [&] { ema_update(p, 0, 1.5); });
  p.learning_rate = 0.0;
  expect_error(ErrorCode::out_of_range, [&] { ema_update(p, 0, 0.5); });
}

TEST(UserModel, StructuralScores) {
  auto rel = esrs::testing::five_poi();
  const auto k = rel->to_state({"q1", "q4"});
  EXPECT_DOUBLE_EQ(rel_score(*rel, rel->index_of("q5"), k), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(rel_score(*rel, rel->index_of("q2"), k), 0.0);
  EXPECT_DOUBLE_EQ(rel_score(*rel, rel->index_of("q4"), rel->to_state({"q1"})), 0.5);
  EXPECT_DOUBLE_EQ(depth_score(*rel, rel->index_of("q5")), 0.6);
}

TEST(UserModel, CategoryRelevance) {
  std::vector<std::string> a{"art", "gallery"}, b{"art", "museum", "history"};
  EXPECT_DOUBLE_EQ(jaccard(a, b), 0.25);
  EXPECT_DOUBLE_EQ(jaccard(std::vector<std::string>{}, std::vector<std::string>{}), 0.0);
  PoiAttributes poi{"q4", "Art Gallery", a, 0.75, 0.7};
  EXPECT_DOUBLE_EQ(category_relevance(poi, std::vector<std::string>{}, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(category_relevance(poi, b), 0.25);
}

TEST(UserModel, PropScore) {
  PoiAttributes poi{"q4", "Art Gallery", {"art"}, 0.75, 0.75};
  EXPECT_DOUBLE_EQ(prop_score(poi, 0.0, {0.0, 0.5, 0.5}), 0.75);
  EXPECT_NEAR(prop_score(poi, 1.0, {}), (1.0 + 0.75 + 0.75) / 3.0, 1e-12);
  expect_error(ErrorCode::weights_not_normalized, [&] { prop_score(poi, 0.5, {0.5, 0.5, 0.5}); });
  poi.popularity = 1.2;
  expect_error(ErrorCode::out_of_range, [&] { prop_score(poi, 0.5, {}); });
}

TEST(UserModel, InterestScoreWorkedValues) {
  InterestWeights w;
  EXPECT_NEAR(interest_score(w, {0.85, 0.8, 0.8, 2.0 / 3.0}), 0.7791666666666667, 1e-12);
  EXPECT_NEAR(interest_score(w, {0.8, 0.75, 0.7, 0.5}), 0.6875, 1e-12);
  expect_error(ErrorCode::out_of_range, [&] { interest_score(w, {1.1, 0, 0, 0}); });
  w.alpha = 0.5;
  expect_error(ErrorCode::weights_not_normalized, [&] { interest_score(w, {0, 0, 0, 0}); });
}

TEST(UserModel, WeightSchedule) {
  InterestWeights base;
  const auto w0 = weight_schedule(base, 0, 10.0);
  EXPECT_DOUBLE_EQ(w0.alpha, 0.0);
  EXPECT_DOUBLE_EQ(w0.beta, 1.0);
  EXPECT_DOUBLE_EQ(w0.gamma, 0.0);
  EXPECT_DOUBLE_EQ(w0.delta, 0.0);
  const auto w10 = weight_schedule(base, 10, 10.0);
  const double f = 1.0 - std::exp(-1.0);
  EXPECT_NEAR(w10.alpha, 0.25 * f, 1e-12);
  EXPECT_NEAR(w10.alpha + w10.beta + w10.gamma + w10.delta, 1.0, 1e-12);
  const auto far = weight_schedule(base, 10000, 10.0);
  EXPECT_NEAR(far.beta, 0.25, 1e-12);
  expect_error(ErrorCode::out_of_range, [&] { weight_schedule(base, 1, 0.0); });
}

TEST(UserModel, HybridSimilarity) {
  auto rel = esrs::testing::five_poi();
  UserProfile u;
  u.confirmed = rel->to_state({"q1", "q4"});
  u.prefs = {1, 0, 0, 1, 0};
  u.kappa = 5.0;
  NeighborSummary v{rel->to_state({"q1"}), {1, 0, 0, 0, 0}};
  const double lambda = 1.0 - std::exp(-2.0 / 5.0);
  const double jac = (1.0 + 1.0) / (2.0 + 1.0);
  const double cos = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(hybrid_similarity(u, v), lambda * jac + (1 - lambda) * cos, 1e-12);
}

TEST(UserModel, CollabScore) {
  auto rel = esrs::testing::five_poi();
  UserProfile u;
  u.confirmed = rel->empty_state();
  u.prefs = {1, 0, 0, 0, 0};
  std::vector<NeighborSummary> ns{{rel->empty_state(), {1, 0, 0, 0.6, 0}}, {rel->empty_state(), {0, 1, 0, 0.2, 0}}};
  // cold user: pure cosine, and the second neighbour is orthogonal
  EXPECT_NEAR(collab_score(u, 3, ns), 0.6, 1e-12);
  expect_error(ErrorCode::no_neighbors, [&] { collab_score(u, 3, std::span<const NeighborSummary>{}); });
  u.prefs.assign(5, 0.0);
  expect_error(ErrorCode::zero_preference_vector, [&] { collab_score(u, 3, ns); });
}

TEST(UserModel, Archetypes) {
  ArchetypeCentroids c;
  c.add("explorer", {0.1, 0.9});
  EXPECT_EQ(stereotype_init("explorer", c), (std::vector<double>{0.1, 0.9}));
  expect_error(ErrorCode::unknown_archetype, [&] { stereotype_init("nobody", c); });
  expect_error(ErrorCode::out_of_range, [&] { c.add("bad", {1.5}); });
}
