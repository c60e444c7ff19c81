#pragma once
// Session store, engine facade and the HTTP API.

#include <atomic>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "esrs/dataset.hpp"
#include "esrs/error.hpp"
#include "esrs/feedback.hpp"
#include "esrs/pipeline.hpp"
#include "esrs/surmise.hpp"

namespace esrs {

/// Sessions keyed by id; each carries its own mutex so requests on one
/// session serialize while different sessions proceed independently.
class SessionStore {
 public:
  struct Slot {
    std::mutex mutex;
    Session session;
    explicit Slot(Session s) : session(std::move(s)) {}
  };

  std::shared_ptr<Slot> get(const std::string& id) const {
    std::shared_lock lock(mutex_);
    auto it = slots_.find(id);
    if (it == slots_.end()) throw Error(ErrorCode::session_not_found, id);
    return it->second;
  }

  void put(Session s) {
    auto slot = std::make_shared<Slot>(std::move(s));
    std::unique_lock lock(mutex_);
    slots_[slot->session.id()] = std::move(slot);
  }

  std::vector<std::string> ids() const {
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, s] : slots_) out.push_back(id);
    return out;
  }

  /// Snapshot of every other session, taken one lock at a time.
  std::vector<NeighborSummary> neighbors_of(const std::string& id) const {
    std::vector<std::shared_ptr<Slot>> others;
    {
      std::shared_lock lock(mutex_);
      for (const auto& [sid, s] : slots_)
        if (sid != id) others.push_back(s);
    }
    std::vector<NeighborSummary> out;
    for (const auto& s : others) {
      std::lock_guard lock(s->mutex);
      out.push_back(summarize(s->session));
    }
    return out;
  }

  nlohmann::json snapshot() const {
    std::vector<std::shared_ptr<Slot>> all;
    {
      std::shared_lock lock(mutex_);
      for (const auto& [sid, s] : slots_) all.push_back(s);
    }
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : all) {
      std::lock_guard lock(s->mutex);
      arr.push_back(session_to_json(s->session));
    }
    return arr;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return slots_.size();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
};

/// Service facade. The dataset is an immutable snapshot replaced as a whole
/// when the relation changes.
class Engine {
 public:
  explicit Engine(Dataset d) : dataset_(std::make_shared<const Dataset>(std::move(d))) {}

  std::shared_ptr<const Dataset> dataset() const {
    std::lock_guard lock(dataset_mutex_);
    return dataset_;
  }
  std::uint64_t relation_version() const {
    std::lock_guard lock(dataset_mutex_);
    return version_;
  }

  SessionStore& store() noexcept { return store_; }
  const SessionStore& store() const noexcept { return store_; }

  void set_audit_log(const std::string& path) {
    std::lock_guard lock(audit_mutex_);
    audit_.open(path, std::ios::app);
    if (!audit_) throw Error(ErrorCode::parse_error, "cannot open audit log " + path);
  }
  std::vector<AuditRecord> audit_records() const {
    std::lock_guard lock(audit_mutex_);
    return audit_records_;
  }

  std::string create_session(const std::string& user_id, const ColdStart& cs) {
    const auto d = dataset();
    const std::string id = "s" + std::to_string(++next_id_);
    Session s = create_session_for(*d, id, user_id, cs);
    store_.put(std::move(s));
    return id;
  }

  Recommendation recommend(const std::string& id, const RecommendOptions& opt) {
    const auto d = dataset();
    auto slot = store_.get(id);
    auto neighbors = store_.neighbors_of(id);
    std::lock_guard lock(slot->mutex);
    const Dataset& view = view_for(*d, slot->session);
    return esrs::recommend(slot->session, view, neighbors, opt);
  }

  nlohmann::json recommend_json(const std::string& id, const RecommendOptions& opt) {
    const auto d = dataset();
    auto slot = store_.get(id);
    auto neighbors = store_.neighbors_of(id);
    std::lock_guard lock(slot->mutex);
    const Dataset& view = view_for(*d, slot->session);
    return recommendation_to_json(view, esrs::recommend(slot->session, view, neighbors, opt));
  }

  AuditRecord post_event(const std::string& id, const FeedbackEvent& event) {
    const auto d = dataset();
    auto slot = store_.get(id);
    AuditRecord rec;
    {
      std::lock_guard lock(slot->mutex);
      const Dataset& view = view_for(*d, slot->session);
      rec = process_event(slot->session, event, {view.config.blim_params(*view.relation), view.config.beam});
    }
    std::lock_guard lock(audit_mutex_);
    audit_records_.push_back(rec);
    if (audit_.is_open()) {
      write_audit_jsonl(audit_, rec);
      audit_.flush();
    }
    return rec;
  }

  nlohmann::json state_json(const std::string& id) const {
    const auto d = dataset();
    auto slot = store_.get(id);
    std::lock_guard lock(slot->mutex);
    return session_state_json(*d, slot->session);
  }

  /// Explanation for a fringe item of the session's current working state.
  nlohmann::json explanation_json(const std::string& id, const std::string& poi) const {
    const auto d = dataset();
    auto slot = store_.get(id);
    std::lock_guard lock(slot->mutex);
    const Session& s = slot->session;
    const auto& rel = s.relation();
    const ExplorationState working(s.distribution().map_state().members() | s.confirmed().members());
    const auto q = rel.find(poi);
    if (!q) throw Error(ErrorCode::unknown_item, poi);
    const Dataset& view = view_for(*d, s);
    auto j = explanation_to_json(rel, build_explanation(rel, *q, working, view.edge_texts));
    j["working_state"] = rel.ids(working);
    j["serendipitous"] = is_serendipitous(rel, *q, working, visited_categories(view.pois, working), view.pois[*q].categories);
    return j;
  }

  nlohmann::json hasse_json() const {
    const auto d = dataset();
    const auto& rel = *d->relation;
    nlohmann::json items = nlohmann::json::array();
    for (const auto& p : d->pois)
      items.push_back({{"id", p.id}, {"name", p.name}, {"categories", p.categories}});
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [a, b] : rel.hasse_edges()) {
      auto it = d->edge_texts.find({a, b});
      edges.push_back({{"from", rel.id(a)}, {"to", rel.id(b)},
                       {"text", it == d->edge_texts.end() ? nlohmann::json(nullptr) : nlohmann::json(it->second)}});
    }
    return {{"items", items}, {"edges", edges}, {"relation_version", relation_version()}};
  }

  /// Publishes a new relation over the same POIs and moves every session
  /// whose confirmed state survives onto it. Returns the ids left behind.
  std::vector<std::string> update_relation(std::shared_ptr<const SurmiseRelation> rel) {
    std::shared_ptr<const Dataset> next;
    std::uint64_t version = 0;
    {
      std::lock_guard lock(dataset_mutex_);
      previous_[version_] = dataset_;
      next = std::make_shared<const Dataset>(with_relation(*dataset_, std::move(rel)));
      version = ++version_;
      dataset_ = next;
    }
    std::vector<std::string> stale;
    for (const auto& id : store_.ids()) {
      auto slot = store_.get(id);
      std::lock_guard lock(slot->mutex);
      if (!slot->session.rebind_relation(next->relation, version, next->config.enumeration_limit, next->config.beam))
        stale.push_back(id);
    }
    return stale;
  }

  void save_snapshot(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::parse_error, "cannot write " + path);
    f << store_.snapshot().dump(2) << '\n';
  }

  void load_snapshot(const std::string& path) {
    const auto arr = read_json_file(path);
    const auto d = dataset();
    for (const auto& j : arr) {
      store_.put(session_from_json(*d, j));
      const auto id = j.value("session_id", std::string());
      if (id.size() > 1 && id[0] == 's') {
        try {
          const std::uint64_t n = std::stoull(id.substr(1));
          if (n > next_id_) next_id_ = n;
        } catch (const std::exception&) {
        }
      }
    }
  }

 private:
  static Session create_session_for(const Dataset& d, std::string id, const std::string& user, const ColdStart& cs) {
    return esrs::create_session(d, std::move(id), user, cs);
  }

  /// The dataset version a session is bound to.
  const Dataset& view_for(const Dataset& current, const Session& s) const {
    if (s.relation_ptr() == current.relation) return current;
    std::lock_guard lock(dataset_mutex_);
    auto it = previous_.find(s.relation_version());
    if (it != previous_.end() && it->second->relation == s.relation_ptr()) return *it->second;
    return current;
  }

  mutable std::mutex dataset_mutex_;
  std::shared_ptr<const Dataset> dataset_;
  std::map<std::uint64_t, std::shared_ptr<const Dataset>> previous_;
  std::uint64_t version_ = 0;
  SessionStore store_;
  std::atomic<std::uint64_t> next_id_{0};
  mutable std::mutex audit_mutex_;
  std::ofstream audit_;
  std::vector<AuditRecord> audit_records_;
};

// ---------------------------------------------------------------------------
// HTTP

inline int http_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::session_not_found:
    case ErrorCode::unknown_item:
      return 404;
    case ErrorCode::not_in_fringe:
      return 409;
    case ErrorCode::parse_error:
    case ErrorCode::invalid_argument:
    case ErrorCode::unknown_archetype:
    case ErrorCode::out_of_range:
    case ErrorCode::weights_not_normalized:
    case ErrorCode::invalid_state:
      return 400;
    default:
      return 500;
  }
}

inline ColdStart cold_start_from_json(const nlohmann::json& j) {
  const auto kind = j.value("kind", std::string("decline"));
  if (kind == "decline") return ColdStart::decline();
  if (kind == "questionnaire") return ColdStart::questionnaire(j.value("categories", std::vector<std::string>{}));
  if (kind == "archetype") return ColdStart::from_archetype(j.at("archetype").get<std::string>());
  throw Error(ErrorCode::invalid_argument, "unknown cold-start kind '" + kind + "'");
}

/// Accepts either explicit bits or a raw signal to classify.
inline FeedbackEvent event_from_json(const nlohmann::json& j, const std::string& user_id, const SignalThresholds& th) {
  const auto poi = j.at("poi").get<std::string>();
  const auto ts = j.value("timestamp", std::string());
  if (j.contains("signal")) {
    const auto& s = j.at("signal");
    const auto kind = s.at("kind").get<std::string>();
    RawSignal raw;
    if (kind == "dwell")
      raw = DwellSignal{s.at("minutes").get<double>()};
    else if (kind == "checkin")
      raw = CheckInSignal{};
    else if (kind == "rating")
      raw = RatingSignal{s.at("value").get<double>(), s.value("scale", 5.0)};
    else
      throw Error(ErrorCode::invalid_argument, "unknown signal kind '" + kind + "'");
    return FeedbackEvent::from_signal(user_id, poi, raw, th, ts);
  }
  FeedbackEvent e;
  e.user_id = user_id;
  e.poi = poi;
  e.engaged = j.value("engaged", false);
  e.high_confidence = j.value("high_confidence", false);
  if (j.contains("intensity") && !j.at("intensity").is_null()) e.intensity = j.at("intensity").get<double>();
  e.timestamp = ts;
  e.validate();
  return e;
}

template <class Handler>
void guarded(httplib::Response& res, Handler&& h) {
  try {
    h();
  } catch (const Error& e) {
    res.status = http_status(e.code());
    res.set_content(nlohmann::json{{"error", to_string(e.code())}, {"message", e.what()}}.dump(), "application/json");
  } catch (const nlohmann::json::exception& e) {
    res.status = 400;
    res.set_content(nlohmann::json{{"error", "ParseError"}, {"message", e.what()}}.dump(), "application/json");
  } catch (const std::exception& e) {
    res.status = 500;
    res.set_content(nlohmann::json{{"error", "Internal"}, {"message", e.what()}}.dump(), "application/json");
  }
}

inline void reply(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

inline void install_routes(httplib::Server& srv, Engine& engine) {
  srv.Post("/sessions", [&engine](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
      const auto user = body.value("user_id", std::string("anonymous"));
      const auto cs = cold_start_from_json(body.value("cold_start", nlohmann::json::object()));
      const auto id = engine.create_session(user, cs);
      reply(res, {{"session_id", id}, {"cold_start_entries", cold_start_entries(*engine.dataset())}}, 201);
    });
  });

  srv.Get(R"(/sessions/([^/]+)/recommendations)", [&engine](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto d = engine.dataset();
      auto opt = RecommendOptions::from_config(d->config);
      if (req.has_param("mode")) opt.mode = parse_mode(req.get_param_value("mode"));
      if (req.has_param("k")) {
        try {
          opt.k_max = std::stoul(req.get_param_value("k"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::invalid_argument, "k must be a non-negative integer");
        }
      }
      reply(res, engine.recommend_json(req.matches[1], opt));
    });
  });

  srv.Post(R"(/sessions/([^/]+)/events)", [&engine](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const auto body = nlohmann::json::parse(req.body);
      const auto state = engine.state_json(id);
      const auto event =
          event_from_json(body, body.value("user_id", state.at("user_id").get<std::string>()), engine.dataset()->config.signals);
      const auto rec = engine.post_event(id, event);
      reply(res, {{"audit", rec.to_json()}, {"state", engine.state_json(id)}});
    });
  });

  srv.Get(R"(/sessions/([^/]+)/state)", [&engine](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, engine.state_json(req.matches[1])); });
  });

  srv.Get("/dataset/hasse", [&engine](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, engine.hasse_json()); });
  });

  srv.Get(R"(/sessions/([^/]+)/explanations/([^/]+))", [&engine](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, engine.explanation_json(req.matches[1], req.matches[2])); });
  });
}

}  // namespace esrs
