#pragma once
// Dataset document, engine configuration and JSONL ingestion.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "esrs/blim.hpp"
#include "esrs/error.hpp"
#include "esrs/feedback.hpp"
#include "esrs/lattice.hpp"
#include "esrs/planner.hpp"
#include "esrs/surmise.hpp"
#include "esrs/user_model.hpp"

namespace esrs {

using nlohmann::json;

struct EngineConfig {
  InterestWeights weights;
  double learning_rate = 0.1;
  double kappa = 5.0;
  double tau = 10.0;
  double content_prior = 0.5;
  double default_beta = 0.05;
  double default_eta = 0.10;
  std::map<PoiId, double> beta;  // per-item overrides
  std::map<PoiId, double> eta;
  LikelihoodForm likelihood = LikelihoodForm::standard;
  std::size_t beam = 500;
  std::size_t enumeration_limit = 4096;
  std::size_t k_max = 3;
  std::optional<std::size_t> plan_beam;  // unset: exact DP
  RankWeights rank_weights{0.6, 0.2, 0.2};
  double diversity_lambda = 1.0;
  std::optional<double> time_budget_minutes;
  double walking_speed_kmh = 4.5;
  SignalThresholds signals;
  InferenceConfig inference;
  std::string default_mode = "path";

  void validate() const {
    weights.validate();
    rank_weights.validate();
    signals.validate();
    inference.validate();
    require_unit(default_beta, "beta");
    require_unit(default_eta, "eta");
    require_unit(content_prior, "content_prior");
    if (beam == 0) throw Error(ErrorCode::invalid_argument, "beam must be at least 1");
    if (plan_beam && *plan_beam == 0) throw Error(ErrorCode::invalid_argument, "plan_beam must be at least 1");
    if (!(walking_speed_kmh > 0.0)) throw Error(ErrorCode::out_of_range, "walking speed must be positive");
    if (default_mode != "path" && default_mode != "rank")
      throw Error(ErrorCode::invalid_argument, "default_mode must be path or rank");
  }

  BlimParams blim_params(const SurmiseRelation& rel) const {
    BlimParams p = BlimParams::uniform(rel.size(), default_beta, default_eta, likelihood);
    for (const auto& [id, v] : beta) p.beta.at(rel.index_of(id)) = v;
    for (const auto& [id, v] : eta) p.eta.at(rel.index_of(id)) = v;
    p.validate(rel.size(), false);
    return p;
  }
};

namespace detail {

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline std::string to_string(LikelihoodForm f) { return f == LikelihoodForm::standard ? "standard" : "published"; }

/// Only keys present in `j` change `cfg`.
inline void merge_config(EngineConfig& cfg, const json& j) {
  try {
    using detail::read_if;
    if (j.contains("interest_weights")) {
      const auto& w = j.at("interest_weights");
      read_if(w, "alpha", cfg.weights.alpha);
      read_if(w, "beta", cfg.weights.beta);
      read_if(w, "gamma", cfg.weights.gamma);
      read_if(w, "delta", cfg.weights.delta);
    }
    if (j.contains("prop_weights")) {
      const auto& w = j.at("prop_weights");
      read_if(w, "category", cfg.weights.prop.category);
      read_if(w, "popularity", cfg.weights.prop.popularity);
      read_if(w, "review", cfg.weights.prop.review);
    }
    read_if(j, "learning_rate", cfg.learning_rate);
    read_if(j, "kappa", cfg.kappa);
    read_if(j, "tau", cfg.tau);
    read_if(j, "content_prior", cfg.content_prior);
    if (j.contains("blim")) {
      const auto& b = j.at("blim");
      read_if(b, "beta", cfg.default_beta);
      read_if(b, "eta", cfg.default_eta);
      read_if(b, "beta_per_item", cfg.beta);
      read_if(b, "eta_per_item", cfg.eta);
      if (b.contains("likelihood")) {
        const auto f = b.at("likelihood").get<std::string>();
        if (f == "standard")
          cfg.likelihood = LikelihoodForm::standard;
        else if (f == "published")
          cfg.likelihood = LikelihoodForm::published;
        else
          throw Error(ErrorCode::parse_error, "unknown likelihood form '" + f + "'");
      }
      read_if(b, "beam", cfg.beam);
      read_if(b, "enumeration_limit", cfg.enumeration_limit);
    }
    if (j.contains("planner")) {
      const auto& p = j.at("planner");
      read_if(p, "k_max", cfg.k_max);
      if (p.contains("beam")) {
        if (p.at("beam").is_null())
          cfg.plan_beam.reset();
        else
          cfg.plan_beam = p.at("beam").get<std::size_t>();
      }
      if (p.contains("time_budget_minutes")) {
        if (p.at("time_budget_minutes").is_null())
          cfg.time_budget_minutes.reset();
        else
          cfg.time_budget_minutes = p.at("time_budget_minutes").get<double>();
      }
      read_if(p, "walking_speed_kmh", cfg.walking_speed_kmh);
      read_if(p, "default_mode", cfg.default_mode);
    }
    if (j.contains("ranking")) {
      const auto& r = j.at("ranking");
      read_if(r, "w_interest", cfg.rank_weights.interest);
      read_if(r, "w_novelty", cfg.rank_weights.novelty);
      read_if(r, "w_diversity", cfg.rank_weights.diversity);
      read_if(r, "lambda", cfg.diversity_lambda);
    }
    if (j.contains("signals")) {
      const auto& s = j.at("signals");
      read_if(s, "theta_d", cfg.signals.dwell_engaged);
      read_if(s, "theta_d_plus", cfg.signals.dwell_high);
      read_if(s, "dwell_normalizer", cfg.signals.dwell_normalizer);
    }
    if (j.contains("inference")) {
      const auto& s = j.at("inference");
      read_if(s, "min_support", cfg.inference.min_support);
      read_if(s, "tau_c", cfg.inference.tau_c);
      read_if(s, "alpha", cfg.inference.alpha);
      read_if(s, "tau_high", cfg.inference.tau_high);
      if (s.contains("precedence")) {
        const auto p = s.at("precedence").get<std::string>();
        if (p == "first_before_some")
          cfg.inference.policy = PrecedencePolicy::first_before_some;
        else if (p == "first_before_first")
          cfg.inference.policy = PrecedencePolicy::first_before_first;
        else
          throw Error(ErrorCode::parse_error, "unknown precedence policy '" + p + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("config: ") + e.what());
  }
}

inline json config_to_json(const EngineConfig& c) {
  json j;
  j["interest_weights"] = {{"alpha", c.weights.alpha}, {"beta", c.weights.beta}, {"gamma", c.weights.gamma},
                           {"delta", c.weights.delta}};
  j["prop_weights"] = {{"category", c.weights.prop.category}, {"popularity", c.weights.prop.popularity},
                       {"review", c.weights.prop.review}};
  j["learning_rate"] = c.learning_rate;
  j["kappa"] = c.kappa;
  j["tau"] = c.tau;
  j["content_prior"] = c.content_prior;
  j["blim"] = {{"beta", c.default_beta},      {"eta", c.default_eta},
               {"beta_per_item", c.beta},     {"eta_per_item", c.eta},
               {"likelihood", to_string(c.likelihood)}, {"beam", c.beam},
               {"enumeration_limit", c.enumeration_limit}};
  j["planner"] = {{"k_max", c.k_max},
                  {"beam", c.plan_beam ? json(*c.plan_beam) : json(nullptr)},
                  {"time_budget_minutes", c.time_budget_minutes ? json(*c.time_budget_minutes) : json(nullptr)},
                  {"walking_speed_kmh", c.walking_speed_kmh},
                  {"default_mode", c.default_mode}};
  j["ranking"] = {{"w_interest", c.rank_weights.interest}, {"w_novelty", c.rank_weights.novelty},
                  {"w_diversity", c.rank_weights.diversity}, {"lambda", c.diversity_lambda}};
  j["signals"] = {{"theta_d", c.signals.dwell_engaged}, {"theta_d_plus", c.signals.dwell_high},
                  {"dwell_normalizer", c.signals.dwell_normalizer}};
  j["inference"] = {{"min_support", c.inference.min_support}, {"tau_c", c.inference.tau_c},
                    {"alpha", c.inference.alpha}, {"tau_high", c.inference.tau_high},
                    {"precedence", c.inference.policy == PrecedencePolicy::first_before_some ? "first_before_some"
                                                                                           : "first_before_first"}};
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::parse_error, "cannot read " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, path + ": " + e.what());
  }
}

/// Applies the document named by $ESRS_CONFIG, if set.
inline void apply_env_override(EngineConfig& cfg) {
  if (const char* path = std::getenv("ESRS_CONFIG"); path && *path) merge_config(cfg, read_json_file(path));
  cfg.validate();
}

// ---------------------------------------------------------------------------

struct Dataset {
  std::vector<PoiAttributes> pois;  // relation index order
  std::shared_ptr<const SurmiseRelation> relation;
  EdgeTexts edge_texts;
  ArchetypeCentroids centroids;  // vectors in relation index order
  EngineConfig config;

  const PoiAttributes& poi(std::size_t i) const { return pois.at(i); }
  std::size_t size() const noexcept { return pois.size(); }
};

inline json poi_to_json(const PoiAttributes& p) {
  json j{{"id", p.id},           {"name", p.name}, {"categories", p.categories}, {"popularity", p.popularity},
         {"review", p.review},   {"lat", p.lat},   {"lon", p.lon},               {"dwell_minutes", p.dwell_minutes}};
  if (p.open_minute) j["open_minute"] = *p.open_minute;
  if (p.close_minute) j["close_minute"] = *p.close_minute;
  return j;
}

inline PoiAttributes poi_from_json(const json& j) {
  PoiAttributes p;
  p.id = j.at("id").get<std::string>();
  p.name = j.value("name", p.id);
  p.categories = j.value("categories", std::vector<std::string>{});
  p.popularity = j.value("popularity", 0.0);
  p.review = j.value("review", 0.0);
  p.lat = j.value("lat", 0.0);
  p.lon = j.value("lon", 0.0);
  p.dwell_minutes = j.value("dwell_minutes", 60.0);
  if (j.contains("open_minute")) p.open_minute = j.at("open_minute").get<int>();
  if (j.contains("close_minute")) p.close_minute = j.at("close_minute").get<int>();
  p.validate();
  return p;
}

/// Canonical form: POIs by id, Hasse edges only (sorted), sorted texts.
inline json dataset_to_json(const Dataset& d) {
  const auto& rel = *d.relation;
  json j;
  j["pois"] = json::array();
  for (const auto& p : d.pois) j["pois"].push_back(poi_to_json(p));
  j["hasse_edges"] = json::array();
  for (const auto& [a, b] : rel.hasse_edge_ids()) j["hasse_edges"].push_back({a, b});
  j["edge_texts"] = json::array();
  for (const auto& [e, text] : d.edge_texts)
    j["edge_texts"].push_back({{"from", rel.id(e.first)}, {"to", rel.id(e.second)}, {"text", text}});
  j["centroids"] = json::object();
  for (const auto& [label, vec] : d.centroids.table()) {
    json c = json::object();
    for (std::size_t i = 0; i < vec.size(); ++i) c[rel.id(i)] = vec[i];
    j["centroids"][label] = c;
  }
  j["config"] = config_to_json(d.config);
  return j;
}

inline Dataset dataset_from_json(const json& j) {
  Dataset d;
  try {
    if (j.contains("config")) merge_config(d.config, j.at("config"));
    d.config.validate();
    std::vector<PoiAttributes> pois;
    for (const auto& p : j.at("pois")) pois.push_back(poi_from_json(p));
    std::sort(pois.begin(), pois.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    std::vector<PoiId> ids;
    for (const auto& p : pois) ids.push_back(p.id);
    const std::set<PoiId> known(ids.begin(), ids.end());
    auto require_known = [&](const std::string& id, const char* where) {
      if (!known.count(id)) throw Error(ErrorCode::dangling_reference, std::string(where) + " names unknown POI '" + id + "'");
    };

    std::vector<IdEdge> edges;
    for (const auto& e : j.value("hasse_edges", json::array())) {
      auto a = e.at(0).get<std::string>(), b = e.at(1).get<std::string>();
      require_known(a, "hasse edge");
      require_known(b, "hasse edge");
      edges.emplace_back(std::move(a), std::move(b));
    }
    d.relation = std::make_shared<const SurmiseRelation>(SurmiseRelation::build(ids, edges));
    d.pois = std::move(pois);
    const auto& rel = *d.relation;

    for (const auto& t : j.value("edge_texts", json::array())) {
      const auto a = t.at("from").get<std::string>(), b = t.at("to").get<std::string>();
      require_known(a, "edge text");
      require_known(b, "edge text");
      const std::size_t ia = rel.index_of(a), ib = rel.index_of(b);
      if (!rel.is_covering(ia, ib))
        throw Error(ErrorCode::dangling_reference, "edge text for " + a + " -> " + b + " which is not a covering edge");
      d.edge_texts[{ia, ib}] = t.at("text").get<std::string>();
    }
    const json centroids = j.value("centroids", json::object());
    for (const auto& [label, c] : centroids.items()) {
      std::vector<double> vec(rel.size(), d.config.content_prior);
      for (const auto& [id, v] : c.items()) {
        require_known(id, "centroid");
        vec[rel.index_of(id)] = v.get<double>();
      }
      d.centroids.add(label, std::move(vec));
    }
    for (const auto& [id, v] : d.config.beta) require_known(id, "config beta");
    for (const auto& [id, v] : d.config.eta) require_known(id, "config eta");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("dataset: ") + e.what());
  }
  return d;
}

inline Dataset load_dataset(const std::string& path) { return dataset_from_json(read_json_file(path)); }

inline void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::parse_error, "cannot write " + path);
  f << dataset_to_json(d).dump(2) << '\n';
}

/// A copy of `d` over a different relation on the same POIs.
inline Dataset with_relation(const Dataset& d, std::shared_ptr<const SurmiseRelation> rel) {
  Dataset out = d;
  if (rel->items() != d.relation->items()) throw Error(ErrorCode::invalid_argument, "relation items differ");
  out.relation = std::move(rel);
  EdgeTexts kept;
  for (const auto& [e, t] : d.edge_texts)
    if (out.relation->is_covering(e.first, e.second)) kept[e] = t;
  out.edge_texts = std::move(kept);
  return out;
}

// ---------------------------------------------------------------------------
// JSONL ingestion

struct RejectedLine {
  std::size_t line = 0;  // 1-based
  ErrorCode code = ErrorCode::parse_error;
  std::string message;
};

struct TrajectoryBatch {
  std::vector<Trajectory> trajectories;
  std::vector<RejectedLine> rejected;
};

inline Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  try {
    t.user_id = j.at("user_id").get<std::string>();
    for (const auto& v : j.at("visits")) {
      Visit visit;
      visit.poi = v.at("poi").get<std::string>();
      visit.timestamp = v.at("timestamp").get<std::string>();
      visit.epoch_seconds = parse_iso8601(visit.timestamp);
      t.visits.push_back(std::move(visit));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, e.what());
  }
  t.validate();
  return t;
}

inline json trajectory_to_json(const Trajectory& t) {
  json visits = json::array();
  for (const auto& v : t.visits) visits.push_back({{"poi", v.poi}, {"timestamp", v.timestamp}});
  return {{"user_id", t.user_id}, {"visits", visits}};
}

/// One trajectory per line; bad lines are set aside with the reason.
inline TrajectoryBatch parse_trajectories(std::istream& in) {
  TrajectoryBatch out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, e.what());
      }
      out.trajectories.push_back(trajectory_from_json(j));
    } catch (const Error& e) {
      out.rejected.push_back({no, e.code(), e.what()});
    }
  }
  return out;
}

inline TrajectoryBatch ingest_trajectories(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::parse_error, "cannot read " + path);
  return parse_trajectories(f);
}

struct ResponseRecord {
  std::string user_id;
  std::map<PoiId, int> responses;
};

/// {"user_id": ..., "responses": {"poi": 0|1, ...}} per line.
inline std::vector<ResponseRecord> parse_responses(std::istream& in) {
  std::vector<ResponseRecord> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      ResponseRecord r;
      r.user_id = j.value("user_id", std::string());
      for (const auto& [id, v] : j.at("responses").items()) {
        const int bit = v.is_boolean() ? (v.get<bool>() ? 1 : 0) : v.get<int>();
        if (bit != 0 && bit != 1) throw Error(ErrorCode::parse_error, "response for " + id + " is not 0/1");
        r.responses[id] = bit;
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse_error, "line " + std::to_string(no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<ResponseRecord> load_responses(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::parse_error, "cannot read " + path);
  return parse_responses(f);
}

}  // namespace esrs
