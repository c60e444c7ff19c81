#pragma once
// Basic Local Independence Model over the ideal lattice: likelihood,
// beam-truncated Bayes update, MAP extraction and EM fitting.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "esrs/error.hpp"
#include "esrs/lattice.hpp"

namespace esrs {

// `standard`: P(r=1 | i∈K) = 1-η_i, P(r=1 | i∉K) = β_i (a proper response
// model; the EM closed forms below are its maximizers).
// `published`: r=1 weighs (1-β_i | β_i) and r=0 weighs (η_i | 1-η_i) for
// i∈K / i∉K. Reproduces the worked example's ×0.95 / ×0.05 multipliers but is
// not normalized over responses.
enum class LikelihoodForm { standard, published };

struct BlimParams {
  std::vector<double> beta;  // false-positive rate per item
  std::vector<double> eta;   // false-negative rate per item
  LikelihoodForm form = LikelihoodForm::standard;

  static BlimParams uniform(std::size_t n, double beta, double eta,
                            LikelihoodForm form = LikelihoodForm::standard) {
    BlimParams p{std::vector<double>(n, beta), std::vector<double>(n, eta), form};
    p.validate(n, false);
    return p;
  }

  /// Rates must lie in [0,1]; `strict` demands the open interval.
  void validate(std::size_t n, bool strict) const {
    if (beta.size() != n || eta.size() != n)
      throw Error(ErrorCode::invalid_argument, "BLIM parameter vectors must cover every item");
    for (std::size_t i = 0; i < n; ++i)
      for (double r : {beta[i], eta[i]}) {
        const bool bad = strict ? !(r > 0.0 && r < 1.0) : !(r >= 0.0 && r <= 1.0);
        if (bad) throw Error(ErrorCode::out_of_range, "BLIM rate " + std::to_string(r) + " for item " + std::to_string(i));
      }
  }
};

inline double response_probability(const BlimParams& p, std::size_t item, bool in_state, bool engaged) {
  const double b = p.beta[item];
  const double e = p.eta[item];
  if (p.form == LikelihoodForm::standard) {
    if (engaged) return in_state ? 1.0 - e : b;
    return in_state ? e : 1.0 - b;
  }
  if (engaged) return in_state ? 1.0 - b : b;
  return in_state ? e : 1.0 - e;
}

struct Response {
  std::size_t item;
  bool engaged;
  friend bool operator==(const Response&, const Response&) = default;
};

/// Observed engagement bits over an assessed item set A.
class ResponseVector {
 public:
  ResponseVector() = default;
  ResponseVector(std::initializer_list<Response> rs) {
    for (const auto& r : rs) set(r.item, r.engaged);
  }

  void set(std::size_t item, bool engaged) {
    for (auto& r : entries_)
      if (r.item == item) {
        r.engaged = engaged;
        return;
      }
    entries_.push_back({item, engaged});
    std::sort(entries_.begin(), entries_.end(), [](const Response& a, const Response& b) { return a.item < b.item; });
  }

  const std::vector<Response>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t size() const noexcept { return entries_.size(); }

  static ResponseVector from_ids(const SurmiseRelation& rel, const std::map<PoiId, int>& bits) {
    ResponseVector out;
    for (const auto& [id, bit] : bits) {
      if (bit != 0 && bit != 1) throw Error(ErrorCode::out_of_range, "response bit for " + id + " must be 0 or 1");
      out.set(rel.index_of(id), bit == 1);
    }
    return out;
  }

  friend bool operator==(const ResponseVector&, const ResponseVector&) = default;

 private:
  std::vector<Response> entries_;
};

/// ℓ(r | K): product over the assessed items.
inline double likelihood(const ResponseVector& responses, const ExplorationState& state, const BlimParams& params) {
  double l = 1.0;
  for (const auto& r : responses.entries()) {
    if (r.item >= params.beta.size()) throw Error(ErrorCode::unknown_item, "index " + std::to_string(r.item));
    l *= response_probability(params, r.item, state.contains(r.item), r.engaged);
  }
  return l;
}

struct WeightedState {
  ExplorationState state;
  double probability = 0.0;
};

/// Probability mass over ideals of one relation. Support is kept in canonical
/// order; entries may carry zero mass (e.g. a beam member with zero posterior).
class StateDistribution {
 public:
  static constexpr double kTolerance = 1e-9;

  StateDistribution() = default;
  StateDistribution(std::shared_ptr<const SurmiseRelation> rel, std::vector<WeightedState> support,
                    double tolerance = kTolerance)
      : rel_(std::move(rel)), support_(std::move(support)) {
    if (!rel_) throw Error(ErrorCode::invalid_argument, "distribution needs a relation");
    if (support_.empty()) throw Error(ErrorCode::empty_distribution, "no states");
    std::sort(support_.begin(), support_.end(),
              [](const WeightedState& a, const WeightedState& b) { return canonical_less(a.state, b.state); });
    double total = 0.0;
    for (std::size_t i = 0; i < support_.size(); ++i) {
      const auto& ws = support_[i];
      require_valid(*rel_, ws.state);
      if (!(ws.probability >= 0.0)) throw Error(ErrorCode::out_of_range, "negative probability");
      if (i > 0 && support_[i - 1].state == ws.state)
        throw Error(ErrorCode::invalid_argument, "state {" + rel_->key(ws.state) + "} listed twice");
      total += ws.probability;
    }
    if (std::abs(total - 1.0) > tolerance)
      throw Error(ErrorCode::not_normalized, "probabilities sum to " + std::to_string(total));
  }

  static StateDistribution uniform(std::shared_ptr<const SurmiseRelation> rel, std::vector<ExplorationState> states) {
    std::vector<WeightedState> ws;
    const double p = states.empty() ? 0.0 : 1.0 / static_cast<double>(states.size());
    for (auto& s : states) ws.push_back({std::move(s), p});
    return StateDistribution(std::move(rel), std::move(ws));
  }

  static StateDistribution point_mass(std::shared_ptr<const SurmiseRelation> rel, ExplorationState state) {
    return StateDistribution(std::move(rel), {{std::move(state), 1.0}});
  }

  const SurmiseRelation& relation() const { return *rel_; }
  const std::shared_ptr<const SurmiseRelation>& relation_ptr() const noexcept { return rel_; }
  const std::vector<WeightedState>& support() const noexcept { return support_; }
  std::size_t size() const noexcept { return support_.size(); }

  double probability(const ExplorationState& s) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), s,
                               [](const WeightedState& a, const ExplorationState& b) { return canonical_less(a.state, b); });
    return (it != support_.end() && it->state == s) ? it->probability : 0.0;
  }

  double total() const {
    double t = 0.0;
    for (const auto& ws : support_) t += ws.probability;
    return t;
  }

  /// Support ordered by probability (descending), ties by canonical key.
  std::vector<WeightedState> ranked() const {
    std::vector<WeightedState> out = support_;
    std::stable_sort(out.begin(), out.end(),
                     [](const WeightedState& a, const WeightedState& b) { return a.probability > b.probability; });
    return out;
  }

  /// argmax, ties by canonical key.
  const ExplorationState& map_state() const {
    const WeightedState* best = &support_.front();
    for (const auto& ws : support_)
      if (ws.probability > best->probability) best = &ws;
    return best->state;
  }

 private:
  std::shared_ptr<const SurmiseRelation> rel_;
  std::vector<WeightedState> support_;
};

struct BeamUpdate {
  StateDistribution posterior;
  ExplorationState map;
  bool tie_truncated = false;  // the B-th and (B+1)-th prior masses were equal
};

/// Bayes update restricted to the B most probable prior states (ties by
/// canonical key); mass outside the beam is dropped.
inline BeamUpdate beam_update(const StateDistribution& dist, const ResponseVector& responses, const BlimParams& params,
                              std::size_t beam_width) {
  if (beam_width == 0) throw Error(ErrorCode::invalid_argument, "beam width must be at least 1");
  if (dist.size() == 0) throw Error(ErrorCode::empty_distribution, "no states");
  auto ranked = dist.ranked();
  bool tie_truncated = false;
  if (ranked.size() > beam_width) {
    tie_truncated = ranked[beam_width - 1].probability == ranked[beam_width].probability;
    ranked.resize(beam_width);
  }
  double z = 0.0;
  for (auto& ws : ranked) {
    ws.probability *= likelihood(responses, ws.state, params);
    z += ws.probability;
  }
  if (!(z > 0.0)) throw Error(ErrorCode::zero_evidence, "every beam state has zero likelihood");
  for (auto& ws : ranked) ws.probability /= z;
  StateDistribution post(dist.relation_ptr(), std::move(ranked));
  ExplorationState map = post.map_state();
  return {std::move(post), std::move(map), tie_truncated};
}

/// Fresh-user prior: uniform over all ideals when there are at most
/// `enumeration_limit`, otherwise uniform over the first `beam_width` states
/// met by breadth-first fringe expansion from ∅.
inline StateDistribution initial_prior(std::shared_ptr<const SurmiseRelation> rel, std::size_t enumeration_limit = 4096,
                                       std::size_t beam_width = 500) {
  if (auto all = enumerate_ideals_bounded(*rel, enumeration_limit))
    return StateDistribution::uniform(std::move(rel), std::move(*all));
  std::vector<ExplorationState> out;
  std::vector<ExplorationState> level{rel->empty_state()};
  while (!level.empty() && out.size() < beam_width) {
    std::vector<ExplorationState> next;
    for (const auto& s : level) {
      if (out.size() == beam_width) break;
      out.push_back(s);
      fringe(*rel, s).for_each([&](std::size_t q) { next.push_back(s.with(q)); });
    }
    std::sort(next.begin(), next.end(), CanonicalLess{});
    next.erase(std::unique(next.begin(), next.end()), next.end());
    level = std::move(next);
  }
  return StateDistribution::uniform(std::move(rel), std::move(out));
}

// ---------------------------------------------------------------------------
// EM

struct EmOptions {
  std::size_t max_iters = 200;
  double tol = 1e-6;
  std::optional<std::size_t> beam;  // unset: exact E-step over all ideals
  std::size_t enumeration_limit = 4096;
};

struct ClampRecord {
  std::size_t iteration;  // 0 = initial parameters
  std::size_t item;
  char parameter;  // 'b' (beta) or 'e' (eta)
  double raw;
  double clamped;
};

struct EmResult {
  BlimParams params;
  StateDistribution prior;
  std::vector<double> trace;  // log-likelihood at each E-step
  std::vector<ClampRecord> clamps;
  std::size_t iterations = 0;
  bool converged = false;
};

inline constexpr double kRateFloor = 1e-4;
inline constexpr double kRateCeil = 1.0 - 1e-4;

inline EmResult em_fit(std::span<const ResponseVector> sequences, std::shared_ptr<const SurmiseRelation> rel,
                       BlimParams init, const StateDistribution& init_prior, const EmOptions& opt = {}) {
  if (sequences.empty()) throw Error(ErrorCode::invalid_argument, "EM needs at least one sequence");
  if (init.form != LikelihoodForm::standard)
    throw Error(ErrorCode::invalid_argument, "EM closed-form updates require the standard likelihood form");
  const std::size_t n = rel->size();
  init.validate(n, false);

  std::vector<ExplorationState> states;
  if (opt.beam) {
    for (const auto& ws : init_prior.support()) states.push_back(ws.state);
  } else {
    auto all = enumerate_ideals_bounded(*rel, opt.enumeration_limit);
    if (!all) throw Error(ErrorCode::budget_exceeded, "more than " + std::to_string(opt.enumeration_limit) + " ideals; configure a beam");
    states = std::move(*all);
  }
  std::vector<double> prior(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) prior[k] = init_prior.probability(states[k]);

  EmResult res;
  BlimParams params = std::move(init);
  auto clamp = [&](std::size_t iteration, std::size_t item, char which, double& v) {
    const double c = std::clamp(v, kRateFloor, kRateCeil);
    if (c != v) res.clamps.push_back({iteration, item, which, v, c});
    v = c;
  };
  for (std::size_t i = 0; i < n; ++i) {
    clamp(0, i, 'b', params.beta[i]);
    clamp(0, i, 'e', params.eta[i]);
  }

  std::vector<std::size_t> order(states.size());
  std::vector<double> post(states.size());
  for (std::size_t it = 0; it < opt.max_iters; ++it) {
    std::vector<double> beta_num(n, 0.0), beta_den(n, 0.0), eta_num(n, 0.0), eta_den(n, 0.0);
    std::vector<double> prior_acc(states.size(), 0.0);
    double ll = 0.0;

    // Beam: the same top-B prior states serve every sequence in this pass.
    std::size_t active = states.size();
    for (std::size_t k = 0; k < states.size(); ++k) order[k] = k;
    if (opt.beam && *opt.beam < states.size()) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return prior[a] > prior[b]; });
      active = *opt.beam;
    }

    for (const auto& r : sequences) {
      double z = 0.0;
      for (std::size_t a = 0; a < active; ++a) {
        const std::size_t k = order[a];
        post[k] = prior[k] * likelihood(r, states[k], params);
        z += post[k];
      }
      if (!(z > 0.0)) throw Error(ErrorCode::zero_evidence, "a training sequence has zero likelihood");
      ll += std::log(z);
      for (std::size_t a = 0; a < active; ++a) {
        const std::size_t k = order[a];
        const double w = post[k] / z;
        prior_acc[k] += w;
        for (const auto& resp : r.entries()) {
          if (states[k].contains(resp.item)) {
            eta_den[resp.item] += w;
            if (!resp.engaged) eta_num[resp.item] += w;
          } else {
            beta_den[resp.item] += w;
            if (resp.engaged) beta_num[resp.item] += w;
          }
        }
      }
    }
    res.trace.push_back(ll);
    res.iterations = it + 1;
    if (res.trace.size() >= 2 && ll - res.trace[res.trace.size() - 2] < opt.tol) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (beta_den[i] > 0.0) {
        params.beta[i] = beta_num[i] / beta_den[i];
        clamp(it + 1, i, 'b', params.beta[i]);
      }
      if (eta_den[i] > 0.0) {
        params.eta[i] = eta_num[i] / eta_den[i];
        clamp(it + 1, i, 'e', params.eta[i]);
      }
    }
    const double m = static_cast<double>(sequences.size());
    for (std::size_t k = 0; k < states.size(); ++k) prior[k] = prior_acc[k] / m;
  }

  std::vector<WeightedState> ws;
  double total = 0.0;
  for (double p : prior) total += p;
  for (std::size_t k = 0; k < states.size(); ++k) ws.push_back({states[k], prior[k] / total});
  res.params = std::move(params);
  res.prior = StateDistribution(std::move(rel), std::move(ws));
  return res;
}

}  // namespace esrs
