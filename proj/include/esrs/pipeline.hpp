#pragma once
// End-to-end recommendation: cold start, working-state assessment, fringe,
// planning or ranking, explanations.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "esrs/blim.hpp"
#include "esrs/dataset.hpp"
#include "esrs/error.hpp"
#include "esrs/feedback.hpp"
#include "esrs/geo.hpp"
#include "esrs/lattice.hpp"
#include "esrs/planner.hpp"
#include "esrs/user_model.hpp"

namespace esrs {

/// Minimal elements: the entries open to a user with nothing visited.
inline std::vector<PoiId> cold_start_entries(const Dataset& d) {
  const auto& rel = *d.relation;
  std::vector<PoiId> out;
  for (std::size_t i : rel.minimal_elements()) out.push_back(rel.id(i));
  return out;
}

struct ColdStart {
  enum class Kind { questionnaire, decline, archetype };
  Kind kind = Kind::decline;
  std::vector<std::string> categories;  // questionnaire answers
  std::string archetype;

  static ColdStart questionnaire(std::vector<std::string> cats) { return {Kind::questionnaire, std::move(cats), {}}; }
  static ColdStart decline() { return {Kind::decline, {}, {}}; }
  static ColdStart from_archetype(std::string label) { return {Kind::archetype, {}, std::move(label)}; }
};

inline constexpr double kQuestionnaireMatch = 1.0;

/// Questionnaire: entries sharing a stated category start at 1, everything
/// else at the content prior. Decline: scheduled weights (w_β = 1 at t = 0).
/// Archetype: the centroid.
inline Session create_session(const Dataset& d, std::string session_id, std::string user_id, const ColdStart& cs) {
  const auto& rel = *d.relation;
  const auto& cfg = d.config;
  UserProfile p;
  p.user_id = std::move(user_id);
  p.confirmed = rel.empty_state();
  p.prefs.assign(rel.size(), cfg.content_prior);
  p.weights = cfg.weights;
  p.learning_rate = cfg.learning_rate;
  p.kappa = cfg.kappa;
  p.tau = cfg.tau;
  switch (cs.kind) {
    case ColdStart::Kind::questionnaire:
      for (std::size_t q : rel.minimal_elements())
        for (const auto& c : d.pois[q].categories)
          if (std::find(cs.categories.begin(), cs.categories.end(), c) != cs.categories.end())
            p.prefs[q] = kQuestionnaireMatch;
      break;
    case ColdStart::Kind::decline:
      p.weight_mode = WeightMode::scheduled;
      break;
    case ColdStart::Kind::archetype:
      p.prefs = stereotype_init(cs.archetype, d.centroids);
      break;
  }
  return Session(std::move(session_id), d.relation, std::move(p),
                 initial_prior(d.relation, cfg.enumeration_limit, cfg.beam));
}

inline NeighborSummary summarize(const Session& s) { return {s.confirmed(), s.profile().prefs}; }

// ---------------------------------------------------------------------------
// Interest

/// Hook for additional scoring terms; receives the base interest.
using ScoreAdjuster = std::function<double(const PoiAttributes&, const ExplorationState&, double)>;

/// I(u, q, K) for a fixed user snapshot. Collab falls back to the content
/// prior when there are no neighbours to consult.
class InterestScorer {
 public:
  InterestScorer(const Dataset& d, const UserProfile& profile, std::span<const NeighborSummary> neighbors,
                 ScoreAdjuster adjuster = {})
      : d_(d), profile_(profile), weights_(effective_weights(profile)), adjuster_(std::move(adjuster)) {
    collab_.assign(d.size(), d.config.content_prior);
    if (!neighbors.empty()) {
      try {
        for (std::size_t q = 0; q < d.size(); ++q) collab_[q] = collab_score(profile, q, neighbors);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::zero_preference_vector) throw;
        collab_.assign(d.size(), d.config.content_prior);
      }
    }
  }

  InterestComponents components(std::size_t q, const ExplorationState& k) const {
    const auto& rel = *d_.relation;
    const auto visited = visited_categories(d_.pois, k);
    InterestComponents c;
    c.pref = profile_.prefs.at(q);
    c.prop = prop_score(d_.pois[q], category_relevance(d_.pois[q], visited, d_.config.content_prior), weights_.prop);
    c.collab = collab_[q];
    c.rel = rel_score(rel, q, k);
    return c;
  }

  double operator()(std::size_t q, const ExplorationState& k) const {
    const double base = interest_score(weights_, components(q, k));
    return adjuster_ ? adjuster_(d_.pois[q], k, base) : base;
  }

  const InterestWeights& weights() const noexcept { return weights_; }

 private:
  const Dataset& d_;
  const UserProfile& profile_;
  InterestWeights weights_;
  std::vector<double> collab_;
  ScoreAdjuster adjuster_;
};

// ---------------------------------------------------------------------------

enum class RecommendMode { path, rank };

inline RecommendMode parse_mode(const std::string& s) {
  if (s == "path") return RecommendMode::path;
  if (s == "rank") return RecommendMode::rank;
  throw Error(ErrorCode::invalid_argument, "mode must be path or rank, got '" + s + "'");
}

inline std::string to_string(RecommendMode m) { return m == RecommendMode::path ? "path" : "rank"; }

struct RecommendOptions {
  RecommendMode mode = RecommendMode::path;
  std::size_t k_max = 3;
  std::optional<std::size_t> plan_beam;
  RankWeights rank_weights;
  double lambda = 1.0;
  std::optional<double> time_budget_minutes;
  double walking_speed_kmh = 4.5;
  ResponseVector recent;  // folded into the distribution before assessment
  ScoreAdjuster adjuster;

  static RecommendOptions from_config(const EngineConfig& c) {
    RecommendOptions o;
    o.mode = parse_mode(c.default_mode);
    o.k_max = c.k_max;
    o.plan_beam = c.plan_beam;
    o.rank_weights = c.rank_weights;
    o.lambda = c.diversity_lambda;
    o.time_budget_minutes = c.time_budget_minutes;
    o.walking_speed_kmh = c.walking_speed_kmh;
    return o;
  }
};

struct RecommendedItem {
  PoiId poi;
  std::size_t step = 0;                 // 1-based position
  std::vector<PoiId> state_before;      // state the item extends
  double interest = 0.0;
  std::optional<RankedItem> ranking;    // rank mode
  bool serendipitous = false;
  Explanation explanation;
};

struct Recommendation {
  RecommendMode mode = RecommendMode::path;
  std::vector<PoiId> working_state;
  std::vector<PoiId> fringe;
  std::vector<RecommendedItem> items;
  double value = 0.0;
  bool exploration_complete = false;
  bool beam_limited = false;
  bool infeasible_budget = false;
  std::string notice;
};

inline constexpr const char* kExplorationComplete =
    "Exploration complete; propose a new semantic cluster or city area.";

/// Minutes from the nearest visited POI (none: zero).
inline std::function<double(const ExplorationState&, std::size_t)> walking_travel(const Dataset& d, double speed_kmh) {
  return [&d, speed_kmh](const ExplorationState& k, std::size_t q) {
    double best = -1.0;
    k.members().for_each([&](std::size_t p) {
      const double km = distance_km(d.pois[p], d.pois[q]);
      if (best < 0.0 || km < best) best = km;
    });
    return best < 0.0 ? 0.0 : best / speed_kmh * 60.0;
  };
}

/// Phase 1: optional update with `recent`, working state = MAP ∪ confirmed.
/// Phase 2: fringe of the working state. Phase 3: plan or rank. The
/// confirmed state is read only.
inline Recommendation recommend(Session& session, const Dataset& d, std::span<const NeighborSummary> neighbors,
                                const RecommendOptions& opt) {
  const auto& rel = *d.relation;
  if (&session.relation() != &rel && session.relation().items() != rel.items())
    throw Error(ErrorCode::invalid_argument, "session and dataset disagree on items");

  if (!opt.recent.empty())
    session.set_distribution(beam_update(session.distribution(), opt.recent, d.config.blim_params(rel), d.config.beam).posterior);
  const ExplorationState working(session.distribution().map_state().members() | session.confirmed().members());

  Recommendation out;
  out.mode = opt.mode;
  out.working_state = rel.ids(working);
  const IndexSet f = fringe(rel, working);
  out.fringe = rel.ids(f);
  if (f.empty()) {
    out.exploration_complete = true;
    out.notice = kExplorationComplete;
    return out;
  }

  const InterestScorer scorer(d, session.profile(), neighbors, opt.adjuster);
  auto describe = [&](std::size_t q, const ExplorationState& k, std::size_t step) {
    RecommendedItem item;
    item.poi = rel.id(q);
    item.step = step;
    item.state_before = rel.ids(k);
    item.interest = scorer(q, k);
    item.serendipitous = is_serendipitous(rel, q, k, visited_categories(d.pois, k), d.pois[q].categories);
    item.explanation = build_explanation(rel, q, k, d.edge_texts);
    return item;
  };

  if (opt.mode == RecommendMode::path) {
    PlanRequest req{working, opt.k_max, opt.plan_beam};
    PlanResult plan;
    if (opt.time_budget_minutes) {
      TimeBudget tb;
      tb.max_minutes = *opt.time_budget_minutes;
      for (const auto& p : d.pois) tb.durations.push_back(p.dwell_minutes);
      tb.travel = walking_travel(d, opt.walking_speed_kmh);
      plan = plan_path_timed(rel, req, tb, scorer);
    } else {
      plan = plan_path(rel, req, scorer);
    }
    out.value = plan.value;
    out.beam_limited = plan.beam_limited;
    out.infeasible_budget = plan.infeasible_budget;
    ExplorationState k = working;
    for (std::size_t j = 0; j < plan.path.size(); ++j) {
      out.items.push_back(describe(plan.path[j], k, j + 1));
      k = k.with(plan.path[j]);
    }
  } else {
    const auto ranked = diversified_rank(rel, working, d.pois, opt.k_max, opt.rank_weights,
                                         [&](std::size_t q) { return scorer(q, working); }, opt.lambda);
    for (std::size_t j = 0; j < ranked.size(); ++j) {
      auto item = describe(ranked[j].poi, working, j + 1);
      item.ranking = ranked[j];
      out.items.push_back(std::move(item));
      out.value += ranked[j].total;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON views

inline nlohmann::json explanation_to_json(const SurmiseRelation& rel, const Explanation& e) {
  nlohmann::json just = nlohmann::json::array();
  for (const auto& j : e.justifications)
    just.push_back({{"from", rel.id(j.from)}, {"to", rel.id(j.to)}, {"text", j.text}, {"generated", j.generated}});
  return {{"target", rel.id(e.target)}, {"chain", rel.ids(std::span<const std::size_t>(e.chain))},
          {"justifications", just}, {"summary", e.summary}};
}

inline nlohmann::json recommendation_to_json(const Dataset& d, const Recommendation& r) {
  const auto& rel = *d.relation;
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items) {
    nlohmann::json j{{"poi", it.poi},
                     {"name", d.pois[rel.index_of(it.poi)].name},
                     {"step", it.step},
                     {"state_before", it.state_before},
                     {"interest", it.interest},
                     {"serendipitous", it.serendipitous},
                     {"explanation", explanation_to_json(rel, it.explanation)}};
    if (it.ranking) {
      j["diversity"] = it.ranking->diversity;
      j["novelty"] = it.ranking->novelty;
      j["total"] = it.ranking->total;
    }
    items.push_back(std::move(j));
  }
  return {{"mode", to_string(r.mode)},
          {"working_state", r.working_state},
          {"fringe", r.fringe},
          {"items", items},
          {"value", r.value},
          {"exploration_complete", r.exploration_complete},
          {"beam_limited", r.beam_limited},
          {"infeasible_budget", r.infeasible_budget},
          {"notice", r.notice}};
}

inline nlohmann::json distribution_to_json(const SurmiseRelation& rel, const StateDistribution& dist, std::size_t top) {
  nlohmann::json out = nlohmann::json::array();
  const auto ranked = dist.ranked();
  for (std::size_t i = 0; i < ranked.size() && i < top; ++i)
    out.push_back({{"state", rel.ids(ranked[i].state)}, {"probability", ranked[i].probability}});
  return out;
}

/// Confirmed members, fringe, blocked items and the top of the distribution.
inline nlohmann::json session_state_json(const Dataset& d, const Session& s) {
  const auto& rel = s.relation();
  const IndexSet& f = s.counters().fringe();
  std::vector<PoiId> blocked;
  for (std::size_t q = 0; q < rel.size(); ++q)
    if (!s.confirmed().contains(q) && !f.contains(q)) blocked.push_back(rel.id(q));
  nlohmann::json prefs = nlohmann::json::object();
  for (std::size_t q = 0; q < rel.size(); ++q) prefs[rel.id(q)] = s.profile().prefs[q];
  (void)d;
  return {{"session_id", s.id()},
          {"user_id", s.profile().user_id},
          {"confirmed", rel.ids(s.confirmed())},
          {"fringe", rel.ids(f)},
          {"blocked", blocked},
          {"map_state", rel.ids(s.distribution().map_state())},
          {"distribution", distribution_to_json(rel, s.distribution(), 10)},
          {"preferences", prefs},
          {"interactions", s.profile().interactions},
          {"weight_mode", s.profile().weight_mode == WeightMode::scheduled ? "scheduled" : "fixed"},
          {"relation_version", s.relation_version()}};
}

// ---------------------------------------------------------------------------
// Session documents (snapshots and --session-file)

inline nlohmann::json session_to_json(const Session& s) {
  const auto& rel = s.relation();
  const auto& p = s.profile();
  nlohmann::json prefs = nlohmann::json::object();
  for (std::size_t q = 0; q < rel.size(); ++q) prefs[rel.id(q)] = p.prefs[q];
  nlohmann::json dist = nlohmann::json::array();
  for (const auto& ws : s.distribution().support())
    dist.push_back({{"state", rel.ids(ws.state)}, {"probability", ws.probability}});
  return {{"session_id", s.id()},
          {"user_id", p.user_id},
          {"confirmed", rel.ids(p.confirmed)},
          {"preferences", prefs},
          {"weights",
           {{"alpha", p.weights.alpha}, {"beta", p.weights.beta}, {"gamma", p.weights.gamma}, {"delta", p.weights.delta}}},
          {"weight_mode", p.weight_mode == WeightMode::scheduled ? "scheduled" : "fixed"},
          {"learning_rate", p.learning_rate},
          {"kappa", p.kappa},
          {"tau", p.tau},
          {"interactions", p.interactions},
          {"distribution", dist},
          {"relation_version", s.relation_version()}};
}

/// Missing fields take dataset defaults; a missing distribution becomes the
/// fresh-user prior.
inline Session session_from_json(const Dataset& d, const nlohmann::json& j) {
  const auto& rel = *d.relation;
  try {
    UserProfile p;
    p.user_id = j.value("user_id", std::string("anonymous"));
    p.prefs.assign(rel.size(), d.config.content_prior);
    const nlohmann::json prefs = j.value("preferences", nlohmann::json::object());
    for (const auto& [id, v] : prefs.items()) {
      p.prefs.at(rel.index_of(id)) = v.get<double>();
      require_unit(p.prefs[rel.index_of(id)], "preference");
    }
    p.confirmed = rel.to_state(j.value("confirmed", std::vector<PoiId>{}));
    require_valid(rel, p.confirmed);
    p.weights = d.config.weights;
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      p.weights.alpha = w.value("alpha", p.weights.alpha);
      p.weights.beta = w.value("beta", p.weights.beta);
      p.weights.gamma = w.value("gamma", p.weights.gamma);
      p.weights.delta = w.value("delta", p.weights.delta);
      p.weights.validate();
    }
    p.weight_mode = j.value("weight_mode", std::string("fixed")) == "scheduled" ? WeightMode::scheduled : WeightMode::fixed;
    p.learning_rate = j.value("learning_rate", d.config.learning_rate);
    p.kappa = j.value("kappa", d.config.kappa);
    p.tau = j.value("tau", d.config.tau);
    p.interactions = j.value("interactions", std::size_t{0});

    StateDistribution dist;
    if (j.contains("distribution") && !j.at("distribution").empty()) {
      std::vector<WeightedState> ws;
      for (const auto& e : j.at("distribution"))
        ws.push_back({rel.to_state(e.at("state").get<std::vector<PoiId>>()), e.at("probability").get<double>()});
      dist = StateDistribution(d.relation, std::move(ws), 1e-6);
    } else {
      dist = initial_prior(d.relation, d.config.enumeration_limit, d.config.beam);
    }
    return Session(j.value("session_id", std::string("s0")), d.relation, std::move(p), std::move(dist),
                   j.value("relation_version", std::uint64_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("session: ") + e.what());
  }
}

}  // namespace esrs
