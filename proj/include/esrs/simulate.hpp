#pragma once
// Scripted users over a dataset, with every response checked against the
// structural guarantees.

#include <algorithm>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "esrs/dataset.hpp"
#include "esrs/pipeline.hpp"
#include "esrs/service.hpp"

namespace esrs {

/// Random DAG over n POIs (edge i→j, i<j, with probability `density`),
/// random attributes, two archetypes.
inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, double density) {
  static const std::vector<std::string> kCats{"museum", "park", "food", "music", "art", "history", "market"};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  nlohmann::json j;
  j["pois"] = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> cats{kCats[rng() % kCats.size()]};
    if (u(rng) < 0.4) cats.push_back(kCats[rng() % kCats.size()]);
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    j["pois"].push_back({{"id", "p" + std::to_string(100 + i)},
                         {"name", "Place " + std::to_string(i)},
                         {"categories", cats},
                         {"popularity", u(rng)},
                         {"review", u(rng)},
                         {"lat", 45.0 + 0.05 * u(rng)},
                         {"lon", 7.0 + 0.05 * u(rng)},
                         {"dwell_minutes", 20.0 + 100.0 * u(rng)}});
  }
  j["hasse_edges"] = nlohmann::json::array();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (u(rng) < density) j["hasse_edges"].push_back({"p" + std::to_string(100 + a), "p" + std::to_string(100 + b)});
  for (const char* label : {"explorer", "foodie"}) {
    nlohmann::json c = nlohmann::json::object();
    for (std::size_t i = 0; i < n; ++i) c["p" + std::to_string(100 + i)] = u(rng);
    j["centroids"][label] = c;
  }
  j["config"] = {{"planner", {{"k_max", 3}}}};
  return dataset_from_json(j);
}

struct GuaranteeReport {
  std::size_t recommendations = 0;
  std::size_t items = 0;
  std::size_t events = 0;
  std::size_t guard_rejections = 0;
  std::size_t outside_fringe = 0;         // recommended item not in the step's fringe
  std::size_t missing_explanation = 0;    // explanation absent or for another target
  std::size_t chain_outside_state = 0;    // chain element not in the step's working state
  std::size_t chain_not_maximal = 0;      // chain is not a maximal chain of ↓q \ {q}
  std::size_t confirmed_mutated = 0;      // confirmed state changed by recommend
  std::size_t confirmed_invalid = 0;      // confirmed state not an ideal after an event

  bool ok() const {
    return outside_fringe == 0 && missing_explanation == 0 && chain_outside_state == 0 && chain_not_maximal == 0 &&
           confirmed_mutated == 0 && confirmed_invalid == 0;
  }

  nlohmann::json to_json() const {
    return {{"recommendations", recommendations},
            {"items", items},
            {"events", events},
            {"guard_rejections", guard_rejections},
            {"outside_fringe", outside_fringe},
            {"missing_explanation", missing_explanation},
            {"chain_outside_state", chain_outside_state},
            {"chain_not_maximal", chain_not_maximal},
            {"confirmed_mutated", confirmed_mutated},
            {"confirmed_invalid", confirmed_invalid},
            {"ok", ok()}};
  }

  GuaranteeReport& operator+=(const GuaranteeReport& o) {
    recommendations += o.recommendations;
    items += o.items;
    events += o.events;
    guard_rejections += o.guard_rejections;
    outside_fringe += o.outside_fringe;
    missing_explanation += o.missing_explanation;
    chain_outside_state += o.chain_outside_state;
    chain_not_maximal += o.chain_not_maximal;
    confirmed_mutated += o.confirmed_mutated;
    confirmed_invalid += o.confirmed_invalid;
    return *this;
  }
};

/// Checks one response. Path items are judged against the state reached
/// by the preceding steps; ranked items against the working state.
inline void audit_recommendation(const SurmiseRelation& rel, const Recommendation& r, GuaranteeReport& rep) {
  ++rep.recommendations;
  ExplorationState k = rel.to_state(std::span<const PoiId>(r.working_state));
  for (const auto& item : r.items) {
    ++rep.items;
    const std::size_t q = rel.index_of(item.poi);
    const ExplorationState before = rel.to_state(std::span<const PoiId>(item.state_before));
    const ExplorationState& ref = r.mode == RecommendMode::path ? k : before;
    if (!(before == ref) || !fringe(rel, ref).contains(q)) ++rep.outside_fringe;
    if (item.explanation.target != q) ++rep.missing_explanation;
    bool inside = true;
    for (std::size_t c : item.explanation.chain) inside = inside && ref.contains(c);
    if (!inside) ++rep.chain_outside_state;

    // maximal: consecutive covers, bottom minimal in ↓q, top covered by q
    const auto& ch = item.explanation.chain;
    bool maximal = true;
    IndexSet below = rel.down(q);
    below.erase(q);
    if (ch.empty()) {
      maximal = below.empty();
    } else {
      maximal = rel.lower_covers(ch.front()).empty() && rel.is_covering(ch.back(), q);
      for (std::size_t i = 0; i + 1 < ch.size(); ++i) maximal = maximal && rel.is_covering(ch[i], ch[i + 1]);
    }
    if (!maximal) ++rep.chain_not_maximal;
    if (r.mode == RecommendMode::path) k = k.with(q);
  }
}

struct SimulationOptions {
  std::uint64_t seed = 42;
  std::size_t sessions = 3;
  std::size_t steps = 15;
  double adversarial_rate = 0.2;
};

/// Runs `sessions` users for `steps` rounds each (recommend, then one event)
/// through an Engine; writes one JSON line per round when `log` is set.
inline GuaranteeReport simulate(Engine& engine, const SimulationOptions& opt, std::ostream* log = nullptr) {
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GuaranteeReport rep;
  const auto d = engine.dataset();
  const auto& rel = *d->relation;

  std::vector<std::string> ids;
  std::vector<std::string> archetypes;
  for (const auto& [label, c] : d->centroids.table()) archetypes.push_back(label);
  for (std::size_t s = 0; s < opt.sessions; ++s) {
    ColdStart cs = ColdStart::decline();
    const auto pick = rng() % 3;
    if (pick == 1 && !archetypes.empty()) cs = ColdStart::from_archetype(archetypes[rng() % archetypes.size()]);
    if (pick == 2) cs = ColdStart::questionnaire(d->pois[rng() % d->size()].categories);
    ids.push_back(engine.create_session("user" + std::to_string(s), cs));
  }

  for (std::size_t step = 0; step < opt.steps; ++step) {
    for (const auto& id : ids) {
      auto ro = RecommendOptions::from_config(d->config);
      ro.mode = u(rng) < 0.5 ? RecommendMode::path : RecommendMode::rank;
      ro.k_max = 1 + rng() % 4;
      if (u(rng) < 0.3) ro.plan_beam = 1 + rng() % 3;
      if (u(rng) < 0.3) {
        const std::size_t q = rng() % rel.size();
        ro.recent.set(q, u(rng) < 0.5);
      }
      if (ro.mode == RecommendMode::rank) {
        const double a = u(rng), b = u(rng) * (1.0 - a);
        ro.rank_weights = {a, b, 1.0 - a - b};
      }

      const auto before = engine.state_json(id).at("confirmed");
      const auto rec = engine.recommend(id, ro);
      const auto after = engine.state_json(id).at("confirmed");
      if (before != after) ++rep.confirmed_mutated;
      audit_recommendation(rel, rec, rep);

      // pick the next visit
      const auto state = engine.state_json(id);
      const auto confirmed = rel.to_state(state.at("confirmed").get<std::vector<PoiId>>());
      std::string poi;
      if (u(rng) < opt.adversarial_rate) {
        std::vector<std::size_t> blocked;
        for (std::size_t q = 0; q < rel.size(); ++q)
          if (!confirmed.contains(q) && !fringe(rel, confirmed).contains(q)) blocked.push_back(q);
        if (!blocked.empty()) poi = rel.id(blocked[rng() % blocked.size()]);
      }
      if (poi.empty() && !rec.items.empty() && u(rng) < 0.7) poi = rec.items.front().poi;
      if (poi.empty()) poi = rel.id(rng() % rel.size());

      RawSignal sig;
      const double r = u(rng);
      if (r < 0.5)
        sig = DwellSignal{90.0 * u(rng)};
      else if (r < 0.75)
        sig = CheckInSignal{};
      else
        sig = RatingSignal{std::round(10.0 * u(rng)) / 2.0, 5.0};
      const auto ev = FeedbackEvent::from_signal(state.at("user_id").get<std::string>(), poi, sig, d->config.signals);
      const auto audit = engine.post_event(id, ev);
      ++rep.events;
      if (audit.kind == AuditKind::guard_rejected) ++rep.guard_rejections;
      const auto now = rel.to_state(engine.state_json(id).at("confirmed").get<std::vector<PoiId>>());
      if (!is_valid_state(rel, now)) ++rep.confirmed_invalid;

      if (log) {
        nlohmann::json line{{"step", step},
                            {"session", id},
                            {"mode", to_string(rec.mode)},
                            {"working_state", rec.working_state},
                            {"recommended", nlohmann::json::array()},
                            {"event", {{"poi", poi}, {"engaged", ev.engaged}, {"high_confidence", ev.high_confidence}}},
                            {"outcome", to_string(audit.kind)},
                            {"confirmed", rel.ids(now)}};
        for (const auto& it : rec.items) line["recommended"].push_back(it.poi);
        if (rec.exploration_complete) line["notice"] = rec.notice;
        *log << line.dump() << '\n';
      }
    }
  }
  return rep;
}

}  // namespace esrs
