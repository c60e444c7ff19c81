#pragma once
// User profile and the components of the unified interest score.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "esrs/error.hpp"
#include "esrs/lattice.hpp"

namespace esrs {

inline constexpr double kWeightTolerance = 1e-9;

inline void require_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::out_of_range, std::string(what) + " = " + std::to_string(v) + " outside [0,1]");
}

struct PropWeights {
  double category = 1.0 / 3.0;
  double popularity = 1.0 / 3.0;
  double review = 1.0 / 3.0;

  void validate() const {
    if (category < 0 || popularity < 0 || review < 0 ||
        std::abs(category + popularity + review - 1.0) > kWeightTolerance)
      throw Error(ErrorCode::weights_not_normalized, "Prop weights must be non-negative and sum to 1");
  }
};

struct InterestWeights {
  double alpha = 0.25;  // preference
  double beta = 0.25;   // location properties
  double gamma = 0.25;  // collaborative
  double delta = 0.25;  // structural accessibility
  PropWeights prop;

  void validate() const {
    if (alpha < 0 || beta < 0 || gamma < 0 || delta < 0 ||
        std::abs(alpha + beta + gamma + delta - 1.0) > kWeightTolerance)
      throw Error(ErrorCode::weights_not_normalized, "interest weights must be non-negative and sum to 1");
    prop.validate();
  }
};

struct PoiAttributes {
  PoiId id;
  std::string name;
  std::vector<std::string> categories;
  double popularity = 0.0;
  double review = 0.0;
  double lat = 0.0;
  double lon = 0.0;
  double dwell_minutes = 60.0;
  std::optional<int> open_minute;   // minutes after midnight
  std::optional<int> close_minute;

  void validate() const {
    if (id.empty()) throw Error(ErrorCode::invalid_argument, "POI without id");
    require_unit(popularity, "popularity");
    require_unit(review, "review");
    if (dwell_minutes < 0) throw Error(ErrorCode::out_of_range, "negative dwell time for " + id);
  }
};

enum class WeightMode { fixed, scheduled };

/// Preferences are indexed like the relation's items.
struct UserProfile {
  std::string user_id;
  ExplorationState confirmed;
  std::vector<double> prefs;
  InterestWeights weights;
  WeightMode weight_mode = WeightMode::fixed;
  double learning_rate = 0.1;
  double kappa = 5.0;
  double tau = 10.0;
  std::size_t interactions = 0;
};

// ---------------------------------------------------------------------------

inline double ema_step(double current, double observed, double rate) {
  return current + rate * (observed - current);
}

/// p ← p + ℓ_r (observed − p) for one item.
inline void ema_update(UserProfile& profile, std::size_t item, double observed) {
  if (!(observed >= 0.0 && observed <= 1.0))
    throw Error(ErrorCode::out_of_range, "observation " + std::to_string(observed) + " outside [0,1]");
  if (!(profile.learning_rate > 0.0 && profile.learning_rate <= 1.0))
    throw Error(ErrorCode::out_of_range, "learning rate must lie in (0,1]");
  profile.prefs.at(item) = ema_step(profile.prefs[item], observed, profile.learning_rate);
}

/// |↓q ∩ K| / |↓q|.
inline double rel_score(const SurmiseRelation& rel, std::size_t q, const ExplorationState& state) {
  const IndexSet& d = rel.down(q);
  return static_cast<double>((d & state.members()).count()) / static_cast<double>(d.count());
}

/// |↓q| / |Q|, state independent.
inline double depth_score(const SurmiseRelation& rel, std::size_t q) {
  return static_cast<double>(rel.down(q).count()) / static_cast<double>(rel.size());
}

inline double jaccard(std::span<const std::string> a, std::span<const std::string> b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& x : sa) inter += sb.count(x);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

inline std::vector<std::string> visited_categories(std::span<const PoiAttributes> pois, const ExplorationState& state) {
  std::set<std::string> cats;
  state.members().for_each([&](std::size_t i) { cats.insert(pois[i].categories.begin(), pois[i].categories.end()); });
  return {cats.begin(), cats.end()};
}

/// C_i: Jaccard between the POI's tags and the tags seen in the state;
/// `content_prior` when nothing has been visited.
inline double category_relevance(const PoiAttributes& poi, std::span<const std::string> visited, double content_prior = 0.5) {
  if (visited.empty()) return content_prior;
  return jaccard(poi.categories, visited);
}

inline double prop_score(const PoiAttributes& poi, double category_relevance, const PropWeights& w) {
  w.validate();
  require_unit(category_relevance, "category relevance");
  poi.validate();
  return std::clamp(w.category * category_relevance + w.popularity * poi.popularity + w.review * poi.review, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Collaborative signal

struct NeighborSummary {
  ExplorationState confirmed;
  std::vector<double> prefs;
};

/// (|E_u ∩ E_v| + ε) / (|E_u ∪ E_v| + ε).
inline double regularized_jaccard(const ExplorationState& a, const ExplorationState& b, double epsilon = 1.0) {
  const double inter = static_cast<double>((a.members() & b.members()).count());
  const double uni = static_cast<double>((a.members() | b.members()).count());
  return (inter + epsilon) / (uni + epsilon);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

inline double similarity_blend(std::size_t confirmed_size, double kappa) {
  return 1.0 - std::exp(-static_cast<double>(confirmed_size) / kappa);
}

/// λ_s · Sim + (1 − λ_s) · cos, with λ_s = 1 − exp(−|E_u| / κ).
inline double hybrid_similarity(const UserProfile& u, const NeighborSummary& v, double epsilon = 1.0) {
  const double lambda = similarity_blend(u.confirmed.size(), u.kappa);
  return lambda * regularized_jaccard(u.confirmed, v.confirmed, epsilon) + (1.0 - lambda) * cosine(u.prefs, v.prefs);
}

/// Similarity-weighted mean of neighbour preferences for `item`. Returns 0
/// when every neighbour has zero similarity.
inline double collab_score(const UserProfile& u, std::size_t item, std::span<const NeighborSummary> neighbors) {
  if (neighbors.empty()) throw Error(ErrorCode::no_neighbors, "collaborative signal needs at least one neighbour");
  if (u.confirmed.empty() && std::all_of(u.prefs.begin(), u.prefs.end(), [](double p) { return p == 0.0; }))
    throw Error(ErrorCode::zero_preference_vector, "cold user with an all-zero preference vector");
  double num = 0.0, den = 0.0;
  for (const auto& v : neighbors) {
    const double s = hybrid_similarity(u, v);
    num += s * v.prefs.at(item);
    den += s;
  }
  return den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : 0.0;
}

// ---------------------------------------------------------------------------

struct InterestComponents {
  double pref = 0.0;
  double prop = 0.0;
  double collab = 0.0;
  double rel = 0.0;
};

/// w_α Pref + w_β Prop + w_γ Collab + w_δ Rel.
inline double interest_score(const InterestWeights& w, const InterestComponents& c) {
  w.validate();
  require_unit(c.pref, "Pref");
  require_unit(c.prop, "Prop");
  require_unit(c.collab, "Collab");
  require_unit(c.rel, "Rel");
  return w.alpha * c.pref + w.beta * c.prop + w.gamma * c.collab + w.delta * c.rel;
}

/// Cold-start ramp: α, γ, δ grow as (1 − e^{−t/τ}) of their asymptotic
/// values, β absorbs the remainder.
inline InterestWeights weight_schedule(const InterestWeights& base, std::size_t t, double tau) {
  base.validate();
  if (!(tau > 0.0)) throw Error(ErrorCode::out_of_range, "tau must be positive");
  const double f = 1.0 - std::exp(-static_cast<double>(t) / tau);
  InterestWeights w = base;
  w.alpha = f * base.alpha;
  w.gamma = f * base.gamma;
  w.delta = f * base.delta;
  w.beta = 1.0 - (w.alpha + w.gamma + w.delta);
  return w;
}

inline InterestWeights effective_weights(const UserProfile& p) {
  return p.weight_mode == WeightMode::scheduled ? weight_schedule(p.weights, p.interactions, p.tau) : p.weights;
}

/// Archetype label → initial preference vector.
class ArchetypeCentroids {
 public:
  void add(std::string label, std::vector<double> centroid) {
    for (double v : centroid) require_unit(v, ("centroid '" + label + "' entry").c_str());
    table_[std::move(label)] = std::move(centroid);
  }
  bool contains(const std::string& label) const { return table_.count(label) != 0; }
  const std::map<std::string, std::vector<double>>& table() const noexcept { return table_; }

  const std::vector<double>& at(const std::string& label) const {
    auto it = table_.find(label);
    if (it == table_.end()) throw Error(ErrorCode::unknown_archetype, label);
    return it->second;
  }

 private:
  std::map<std::string, std::vector<double>> table_;
};

inline std::vector<double> stereotype_init(const std::string& archetype, const ArchetypeCentroids& centroids) {
  return centroids.at(archetype);
}

/// Prior preference for items without evidence. Plug-in point for a learned
/// latent-factor model.
class PreferencePrior {
 public:
  virtual ~PreferencePrior() = default;
  virtual double prior(const UserProfile& profile, std::size_t item) const = 0;
};

class ConstantPreferencePrior final : public PreferencePrior {
 public:
  explicit ConstantPreferencePrior(double value = 0.5) : value_(value) { require_unit(value, "preference prior"); }
  double prior(const UserProfile&, std::size_t) const override { return value_; }

 private:
  double value_;
};

}  // namespace esrs
