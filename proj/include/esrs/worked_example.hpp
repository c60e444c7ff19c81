#pragma once
// The five-POI walkthrough: q1 < q4 < q5 and q2 < q3, one user at {q1},
// a two-step plan and the feedback that follows.

#include <chrono>
#include <iomanip>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "esrs/dataset.hpp"
#include "esrs/feedback.hpp"
#include "esrs/pipeline.hpp"

namespace esrs::example {

inline const char* five_poi_json() {
  return R"json({
  "pois": [
    {"id": "q1", "name": "City Museum", "categories": ["museum", "history"],
     "popularity": 0.85, "review": 0.85, "lat": 48.8606, "lon": 2.3376, "dwell_minutes": 60},
    {"id": "q2", "name": "Latin Quarter", "categories": ["neighbourhood", "heritage"],
     "popularity": 0.70, "review": 0.70, "lat": 48.8493, "lon": 2.3470, "dwell_minutes": 60},
    {"id": "q3", "name": "Medieval Library", "categories": ["library"],
     "popularity": 0.65, "review": 0.65, "lat": 48.8530, "lon": 2.3499, "dwell_minutes": 60},
    {"id": "q4", "name": "Art Gallery", "categories": ["art", "gallery"],
     "popularity": 0.75, "review": 0.75, "lat": 48.8600, "lon": 2.3266, "dwell_minutes": 60},
    {"id": "q5", "name": "Rooftop Bar", "categories": ["nightlife", "architecture"],
     "popularity": 0.80, "review": 0.80, "lat": 48.8738, "lon": 2.2950, "dwell_minutes": 60}
  ],
  "hasse_edges": [["q1", "q4"], ["q4", "q5"], ["q2", "q3"]],
  "edge_texts": [
    {"from": "q1", "to": "q4", "text": "The museum's survey of the city's history frames the movements hung in the gallery."},
    {"from": "q4", "to": "q5", "text": "After the gallery, the rooftop view reads the skyline as a sequence of styles."},
    {"from": "q2", "to": "q3", "text": "Walking the quarter first gives the library's manuscripts their setting."}
  ],
  "centroids": {
    "Cultural Discoverer": {"q1": 0.90, "q2": 0.60, "q3": 0.50, "q4": 0.80, "q5": 0.85},
    "Relaxed Wanderer": {"q1": 0.80, "q2": 0.65, "q3": 0.55, "q4": 0.70, "q5": 0.80}
  },
  "config": {
    "interest_weights": {"alpha": 0.25, "beta": 0.25, "gamma": 0.25, "delta": 0.25},
    "prop_weights": {"category": 0.0, "popularity": 0.5, "review": 0.5},
    "learning_rate": 0.1,
    "blim": {"beta": 0.05, "eta": 0.10, "likelihood": "published"},
    "planner": {"k_max": 2, "beam": null, "default_mode": "path"},
    "ranking": {"w_interest": 1.0, "w_novelty": 0.0, "w_diversity": 0.0, "lambda": 1.0}
  }
})json";
}

inline Dataset five_poi_dataset() { return dataset_from_json(nlohmann::json::parse(five_poi_json())); }

struct ScoreRow {
  PoiId poi;
  std::vector<PoiId> state;
  InterestComponents components;
  double interest = 0.0;
};

struct MemoRow {
  std::vector<PoiId> state;
  std::size_t horizon = 0;
  double value = 0.0;
  std::optional<PoiId> pred;
};

struct Trace {
  Dataset dataset;
  std::uint64_t ideal_count = 0;
  std::vector<std::pair<std::vector<PoiId>, std::vector<PoiId>>> fringes;  // state → fringe
  std::vector<PoiId> working_state;
  std::vector<ScoreRow> scores;
  std::vector<MemoRow> memo;
  std::vector<PoiId> path;
  double value = 0.0;
  double plan_seconds = 0.0;
  Recommendation path_recommendation;
  Recommendation rank_recommendation;
  std::vector<PoiId> confirmed_before_recommend;
  std::vector<PoiId> confirmed_after_recommend;
  AuditRecord feedback;
  double likelihood_in = 0.0;   // factor for states containing q4
  double likelihood_out = 0.0;  // factor for the rest
  std::vector<PoiId> fringe_after;
  std::vector<PoiId> map_after;
  std::vector<WeightedState> posterior_top;
};

/// Runs the walkthrough through the regular pipeline. The user's history is
/// an earlier assessment {q1 engaged, others not} and a 4.5/5 rating at q1;
/// one neighbour session supplies the collaborative signal.
inline Trace run() {
  Trace t;
  t.dataset = five_poi_dataset();
  const Dataset& d = t.dataset;
  const auto& rel = *d.relation;
  const auto blim = d.config.blim_params(rel);
  const FeedbackParams fp{blim, d.config.beam};

  t.ideal_count = count_ideals(rel);
  for (auto ids : std::vector<std::vector<PoiId>>{{}, {"q1"}, {"q1", "q2"}, {"q1", "q4"}})
    t.fringes.emplace_back(ids, rel.ids(fringe(rel, rel.to_state(std::span<const PoiId>(ids)))));

  Session neighbour = create_session(d, "v", "v", ColdStart::from_archetype("Relaxed Wanderer"));
  Session u = create_session(d, "u", "u", ColdStart::from_archetype("Cultural Discoverer"));
  const auto history = ResponseVector::from_ids(rel, {{"q1", 1}, {"q2", 0}, {"q3", 0}, {"q4", 0}, {"q5", 0}});
  u.set_distribution(beam_update(u.distribution(), history, blim, d.config.beam).posterior);
  process_event(u, FeedbackEvent::from_signal("u", "q1", RatingSignal{4.5, 5.0}, d.config.signals), fp);

  const std::vector<NeighborSummary> neighbours{summarize(neighbour)};
  const ExplorationState working(u.distribution().map_state().members() | u.confirmed().members());
  t.working_state = rel.ids(working);

  const InterestScorer scorer(d, u.profile(), neighbours);
  auto row = [&](const char* q, std::initializer_list<PoiId> state) {
    const auto k = rel.to_state(state);
    const std::size_t i = rel.index_of(q);
    t.scores.push_back({q, rel.ids(k), scorer.components(i, k), scorer(i, k)});
  };
  row("q2", {"q1"});
  row("q4", {"q1"});
  row("q3", {"q1", "q2"});
  row("q4", {"q1", "q2"});
  row("q2", {"q1", "q4"});
  row("q5", {"q1", "q4"});

  const auto start = std::chrono::steady_clock::now();
  const auto plan = plan_path(rel, PlanRequest{working, 2, std::nullopt}, scorer);
  t.plan_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& m : plan.trace)
    t.memo.push_back({rel.ids(m.state), m.horizon, m.value, m.pred ? std::optional<PoiId>(rel.id(*m.pred)) : std::nullopt});
  t.path = rel.ids(std::span<const std::size_t>(plan.path));
  t.value = plan.value;

  t.confirmed_before_recommend = rel.ids(u.confirmed());
  auto opt = RecommendOptions::from_config(d.config);
  opt.mode = RecommendMode::path;
  opt.k_max = 2;
  opt.plan_beam.reset();
  t.path_recommendation = recommend(u, d, neighbours, opt);
  opt.mode = RecommendMode::rank;
  opt.rank_weights = {1.0, 0.0, 0.0};
  t.rank_recommendation = recommend(u, d, neighbours, opt);
  t.confirmed_after_recommend = rel.ids(u.confirmed());

  const std::size_t q4 = rel.index_of("q4");
  t.likelihood_in = response_probability(blim, q4, true, true);
  t.likelihood_out = response_probability(blim, q4, false, true);
  FeedbackEvent ev{"u", "q4", true, true, 0.9, ""};
  t.feedback = process_event(u, ev, fp);
  t.fringe_after = rel.ids(u.counters().fringe());
  t.map_after = rel.ids(u.distribution().map_state());
  const auto ranked = u.distribution().ranked();
  t.posterior_top.assign(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(5, ranked.size())));
  return t;
}

inline std::string set_string(const std::vector<PoiId>& ids) {
  if (ids.empty()) return "{}";
  std::string s = "{";
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + ids[i];
  return s + "}";
}

inline void print(std::ostream& os, const Trace& t) {
  const auto& rel = *t.dataset.relation;
  os << std::fixed << std::setprecision(4);
  os << "Instance\n";
  os << "  items: ";
  for (const auto& p : t.dataset.pois) os << p.id << "=" << p.name << "  ";
  os << "\n  covering edges:";
  for (const auto& [a, b] : rel.hasse_edge_ids()) os << " " << a << "<" << b;
  os << "\n  ideals: " << t.ideal_count << "\n  principal ideals:";
  for (std::size_t q = 0; q < rel.size(); ++q) os << " down(" << rel.id(q) << ")=" << set_string(rel.ids(rel.down(q)));
  os << "\n\nFringes\n";
  for (const auto& [k, f] : t.fringes) os << "  Fringe(" << set_string(k) << ") = " << set_string(f) << "\n";

  os << "\nPhase 1: working state " << set_string(t.working_state) << "\n";
  os << "\nInterest scores\n  item  state        Pref    Prop    Collab  Rel     I\n";
  for (const auto& r : t.scores)
    os << "  " << std::left << std::setw(5) << r.poi << " " << std::setw(12) << set_string(r.state) << std::right << " "
       << r.components.pref << "  " << r.components.prop << "  " << r.components.collab << "  " << r.components.rel
       << "  " << r.interest << "\n";

  os << "\nPhase 3: memo table (k = 2, unbounded beam)\n  state        j  value   pred\n";
  for (const auto& m : t.memo)
    os << "  " << std::left << std::setw(12) << set_string(m.state) << std::right << " " << m.horizon << "  " << m.value
       << "  " << (m.pred ? *m.pred : "-") << "\n";
  os << "  optimal path: (";
  for (std::size_t i = 0; i < t.path.size(); ++i) os << (i ? "," : "") << t.path[i];
  os << ")  value " << std::setprecision(10) << t.value << " (22/15 = " << 22.0 / 15.0 << ")" << std::setprecision(4)
     << "\n  planning time: " << std::setprecision(6) << t.plan_seconds << " s\n" << std::setprecision(4);

  os << "\nExplanations\n";
  for (const auto& it : t.path_recommendation.items) {
    os << "  " << it.step << ". " << it.poi << " chain " << set_string(rel.ids(std::span<const std::size_t>(it.explanation.chain)))
       << "\n";
    for (const auto& j : it.explanation.justifications)
      os << "       " << rel.id(j.from) << " -> " << rel.id(j.to) << ": " << j.text << "\n";
  }
  os << "\nRank mode (interest only):";
  for (const auto& it : t.rank_recommendation.items) os << " " << it.poi << "(" << it.interest << ")";
  os << "\nconfirmed before/after recommend: " << set_string(t.confirmed_before_recommend) << " / "
     << set_string(t.confirmed_after_recommend) << "\n";

  os << "\nFeedback on q4 (intensity 0.9, high confidence)\n";
  os << "  pref " << t.feedback.pref_before.value_or(0.0) << " -> " << t.feedback.pref_after.value_or(0.0) << "\n";
  os << "  likelihood factor: states with q4 x" << t.likelihood_in << ", others x" << t.likelihood_out << "\n";
  os << "  guard: " << to_string(t.feedback.kind) << "\n";
  os << "  confirmed " << set_string(t.feedback.confirmed_before) << " -> " << set_string(t.feedback.confirmed_after) << "\n";
  os << "  fringe " << set_string(t.fringe_after) << "\n";
  os << "  MAP " << set_string(t.map_after) << "\n  posterior top:";
  for (const auto& ws : t.posterior_top) os << " " << set_string(rel.ids(ws.state)) << ":" << ws.probability;
  os << "\n";
}

}  // namespace esrs::example
