#pragma once
// Online feedback: signal classification, the guarded confirmed-state update
// and the audit trail.

#include <algorithm>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "esrs/blim.hpp"
#include "esrs/error.hpp"
#include "esrs/lattice.hpp"
#include "esrs/user_model.hpp"

namespace esrs {

struct SignalThresholds {
  double dwell_engaged = 10.0;     // θ_d, minutes
  double dwell_high = 30.0;        // θ_d⁺
  double dwell_normalizer = 60.0;  // intensity = min(dwell / normalizer, 1)

  void validate() const {
    if (!(dwell_engaged > 0.0 && dwell_high > dwell_engaged && dwell_normalizer > 0.0))
      throw Error(ErrorCode::out_of_range, "signal thresholds need 0 < theta_d < theta_d_plus and a positive normalizer");
  }
};

struct DwellSignal {
  double minutes = 0.0;
};
struct CheckInSignal {};
struct RatingSignal {
  double value = 0.0;
  double scale = 5.0;
};
using RawSignal = std::variant<DwellSignal, CheckInSignal, RatingSignal>;

struct ClassifiedSignal {
  bool engaged = false;
  bool high_confidence = false;
  std::optional<double> intensity;
};

inline ClassifiedSignal classify_signal(const RawSignal& raw, const SignalThresholds& th = {}) {
  th.validate();
  if (const auto* d = std::get_if<DwellSignal>(&raw)) {
    if (!(d->minutes >= 0.0)) throw Error(ErrorCode::out_of_range, "negative dwell");
    if (d->minutes <= th.dwell_engaged) return {false, false, std::nullopt};
    return {true, d->minutes > th.dwell_high, std::min(d->minutes / th.dwell_normalizer, 1.0)};
  }
  if (std::holds_alternative<CheckInSignal>(raw)) return {true, true, 1.0};
  const auto& r = std::get<RatingSignal>(raw);
  if (!(r.scale > 0.0) || r.value < 0.0 || r.value > r.scale)
    throw Error(ErrorCode::out_of_range, "rating outside [0, scale]");
  return {true, true, r.value / r.scale};
}

struct FeedbackEvent {
  std::string user_id;
  PoiId poi;
  bool engaged = false;
  bool high_confidence = false;
  std::optional<double> intensity;
  std::string timestamp;

  static FeedbackEvent from_signal(std::string user_id, PoiId poi, const RawSignal& raw,
                                   const SignalThresholds& th = {}, std::string timestamp = {}) {
    const auto c = classify_signal(raw, th);
    return {std::move(user_id), std::move(poi), c.engaged, c.high_confidence,
            c.engaged ? c.intensity : std::nullopt, std::move(timestamp)};
  }

  void validate() const {
    if (intensity && !engaged) throw Error(ErrorCode::invalid_argument, "intensity given for a non-engaged event");
    if (intensity) require_unit(*intensity, "intensity");
  }
};

enum class AuditKind { confirmed_advanced, already_confirmed, guard_rejected, low_confidence, not_engaged, unknown_poi };

inline std::string to_string(AuditKind k) {
  switch (k) {
    case AuditKind::confirmed_advanced: return "ConfirmedAdvanced";
    case AuditKind::already_confirmed: return "AlreadyConfirmed";
    case AuditKind::guard_rejected: return "GuardRejected";
    case AuditKind::low_confidence: return "LowConfidence";
    case AuditKind::not_engaged: return "NotEngaged";
    case AuditKind::unknown_poi: return "UnknownPoi";
  }
  return "UnknownPoi";
}

struct AuditRecord {
  std::string session_id;
  std::string user_id;
  PoiId poi;
  std::string timestamp;
  AuditKind kind = AuditKind::not_engaged;
  bool zero_evidence = false;  // distribution left unchanged
  std::vector<PoiId> confirmed_before;
  std::vector<PoiId> confirmed_after;
  std::optional<double> pref_before;
  std::optional<double> pref_after;
  std::vector<PoiId> map_state;
  std::string message;

  nlohmann::json to_json() const {
    nlohmann::json j{{"session_id", session_id},
                     {"user_id", user_id},
                     {"poi", poi},
                     {"timestamp", timestamp},
                     {"kind", to_string(kind)},
                     {"zero_evidence", zero_evidence},
                     {"confirmed_before", confirmed_before},
                     {"confirmed_after", confirmed_after},
                     {"map_state", map_state},
                     {"message", message}};
    j["pref_before"] = pref_before ? nlohmann::json(*pref_before) : nlohmann::json(nullptr);
    j["pref_after"] = pref_after ? nlohmann::json(*pref_after) : nlohmann::json(nullptr);
    return j;
  }
};

inline void write_audit_jsonl(std::ostream& out, const AuditRecord& r) { out << r.to_json().dump() << '\n'; }

struct FeedbackParams {
  BlimParams blim;
  std::size_t beam = 500;
};

class Session;
AuditRecord process_event(Session& session, const FeedbackEvent& event, const FeedbackParams& params);

/// One user's exploration session. The confirmed state has no public
/// mutator; only process_event may extend it.
class Session {
 public:
  Session(std::string id, std::shared_ptr<const SurmiseRelation> rel, UserProfile profile, StateDistribution dist,
          std::uint64_t relation_version = 0)
      : id_(std::move(id)), rel_(std::move(rel)), profile_(std::move(profile)), dist_(std::move(dist)),
        version_(relation_version) {
    if (!rel_) throw Error(ErrorCode::invalid_argument, "session needs a relation");
    if (profile_.prefs.size() != rel_->size())
      throw Error(ErrorCode::invalid_argument, "preference vector must cover every item");
    if (profile_.confirmed.members().universe() != rel_->size()) profile_.confirmed = rel_->empty_state();
    counters_ = FringeCounters(*rel_, profile_.confirmed);
    if (&dist_.relation() != rel_.get() && dist_.relation().items() != rel_->items())
      throw Error(ErrorCode::invalid_argument, "distribution is over a different item set");
  }

  const std::string& id() const noexcept { return id_; }
  const UserProfile& profile() const noexcept { return profile_; }
  const ExplorationState& confirmed() const noexcept { return profile_.confirmed; }
  const StateDistribution& distribution() const noexcept { return dist_; }
  const FringeCounters& counters() const noexcept { return counters_; }
  const SurmiseRelation& relation() const noexcept { return *rel_; }
  const std::shared_ptr<const SurmiseRelation>& relation_ptr() const noexcept { return rel_; }
  std::uint64_t relation_version() const noexcept { return version_; }

  /// Replaces the latent-state distribution (same relation).
  void set_distribution(StateDistribution dist) {
    if (dist.relation().items() != rel_->items())
      throw Error(ErrorCode::invalid_argument, "distribution is over a different item set");
    dist_ = std::move(dist);
  }

  /// Moves the session onto a newer relation over the same item ids.
  /// Returns false, leaving the session untouched, when the confirmed state
  /// is not an ideal of the new order.
  bool rebind_relation(std::shared_ptr<const SurmiseRelation> rel, std::uint64_t version,
                       std::size_t enumeration_limit = 4096, std::size_t beam = 500) {
    if (rel->items() != rel_->items()) throw Error(ErrorCode::invalid_argument, "relation items changed");
    if (!is_valid_state(*rel, profile_.confirmed)) return false;
    std::vector<WeightedState> kept;
    double z = 0.0;
    for (const auto& ws : dist_.support())
      if (is_valid_state(*rel, ws.state)) {
        kept.push_back(ws);
        z += ws.probability;
      }
    if (kept.empty() || !(z > 0.0)) {
      dist_ = initial_prior(rel, enumeration_limit, beam);
    } else {
      for (auto& ws : kept) ws.probability /= z;
      dist_ = StateDistribution(rel, std::move(kept));
    }
    counters_ = FringeCounters(*rel, profile_.confirmed);
    rel_ = std::move(rel);
    version_ = version;
    return true;
  }

 private:
  friend AuditRecord process_event(Session&, const FeedbackEvent&, const FeedbackParams&);

  std::string id_;
  std::shared_ptr<const SurmiseRelation> rel_;
  UserProfile profile_;
  StateDistribution dist_;
  FringeCounters counters_;
  std::uint64_t version_ = 0;
};

/// (1) EMA on the preference, (2) beam update with the single response,
/// (3) guarded confirmed-state update. Anomalies end up in the record.
inline AuditRecord process_event(Session& s, const FeedbackEvent& event, const FeedbackParams& params) {
  const auto& rel = *s.rel_;
  AuditRecord rec;
  rec.session_id = s.id_;
  rec.user_id = event.user_id;
  rec.poi = event.poi;
  rec.timestamp = event.timestamp;
  rec.confirmed_before = rel.ids(s.profile_.confirmed);

  const auto item = rel.find(event.poi);
  if (!item) {
    rec.kind = AuditKind::unknown_poi;
    rec.message = "unknown POI";
    rec.confirmed_after = rec.confirmed_before;
    rec.map_state = rel.ids(s.dist_.map_state());
    return rec;
  }
  const std::size_t i = *item;
  try {
    event.validate();
  } catch (const Error& e) {
    rec.kind = AuditKind::not_engaged;
    rec.message = std::string("malformed event ignored: ") + e.what();
    rec.confirmed_after = rec.confirmed_before;
    rec.map_state = rel.ids(s.dist_.map_state());
    return rec;
  }

  rec.pref_before = s.profile_.prefs[i];
  const double observed = event.intensity.value_or(event.engaged ? 1.0 : 0.0);
  ema_update(s.profile_, i, observed);
  rec.pref_after = s.profile_.prefs[i];

  ResponseVector r;
  r.set(i, event.engaged);
  try {
    s.dist_ = beam_update(s.dist_, r, params.blim, params.beam).posterior;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::zero_evidence) throw;
    rec.zero_evidence = true;
  }

  if (!event.engaged) {
    rec.kind = AuditKind::not_engaged;
  } else if (!event.high_confidence) {
    rec.kind = AuditKind::low_confidence;
  } else if (s.profile_.confirmed.contains(i)) {
    rec.kind = AuditKind::already_confirmed;
  } else if (s.counters_.fringe().contains(i)) {
    s.counters_.advance(rel, i);
    s.profile_.confirmed = s.counters_.state();
    rec.kind = AuditKind::confirmed_advanced;
  } else {
    rec.kind = AuditKind::guard_rejected;
    std::vector<PoiId> missing;
    rel.down(i).for_each([&](std::size_t p) {
      if (p != i && !s.profile_.confirmed.contains(p)) missing.push_back(rel.id(p));
    });
    rec.message = event.poi + " is outside the fringe; missing prerequisites:";
    for (const auto& m : missing) rec.message += " " + m;
  }
  ++s.profile_.interactions;
  rec.confirmed_after = rel.ids(s.profile_.confirmed);
  rec.map_state = rel.ids(s.dist_.map_state());
  return rec;
}

}  // namespace esrs
