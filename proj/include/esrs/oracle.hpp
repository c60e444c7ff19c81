#pragma once
// Brute-force reference implementations. Test and fixture use only; each one
// works from the definitions (power sets, "K ∪ {q} is an ideal", the raw
// likelihood product) rather than from the fast paths it is compared with.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "esrs/blim.hpp"
#include "esrs/error.hpp"
#include "esrs/lattice.hpp"

namespace esrs::oracle {

struct OracleBudget {
  std::size_t max_items;
};

inline constexpr OracleBudget kIdealBudget{20};
inline constexpr OracleBudget kPathBudget{12};

inline void check_budget(const SurmiseRelation& rel, OracleBudget budget) {
  if (budget.max_items == 0) throw Error(ErrorCode::invalid_argument, "oracle budget must be positive");
  if (rel.size() > budget.max_items)
    throw Error(ErrorCode::budget_exceeded,
                std::to_string(rel.size()) + " items exceed oracle budget " + std::to_string(budget.max_items));
}

// Downward closure checked straight from the order: q' ∈ K and q ⪯ q' ⇒ q ∈ K.
inline bool is_ideal(const SurmiseRelation& rel, const IndexSet& s) {
  for (std::size_t hi = 0; hi < rel.size(); ++hi) {
    if (!s.contains(hi)) continue;
    for (std::size_t lo = 0; lo < rel.size(); ++lo)
      if (rel.leq(lo, hi) && !s.contains(lo)) return false;
  }
  return true;
}

/// Power set filtered by downward closure, sorted by canonical key.
inline std::vector<ExplorationState> enumerate_ideals(const SurmiseRelation& rel, OracleBudget budget = kIdealBudget) {
  check_budget(rel, budget);
  const std::size_t n = rel.size();
  std::vector<ExplorationState> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    IndexSet s(n);
    for (std::size_t i = 0; i < n; ++i)
      if ((mask >> i) & 1u) s.insert(i);
    if (is_ideal(rel, s)) out.emplace_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), CanonicalLess{});
  return out;
}

/// { q ∉ K : K ∪ {q} is an ideal }.
inline std::vector<std::size_t> extensions(const SurmiseRelation& rel, const ExplorationState& k) {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < rel.size(); ++q) {
    if (k.contains(q)) continue;
    IndexSet s = k.members();
    s.insert(q);
    if (is_ideal(rel, s)) out.push_back(q);
  }
  return out;
}

struct PathValue {
  std::vector<std::size_t> path;
  double value = 0.0;
};

using StateScore = std::function<double(std::size_t item, const ExplorationState& state)>;

/// Exhaustive search over fringe-guided paths of length min(k, until the
/// fringe empties). Path values are summed from the last step backwards so
/// they are bit-identical to a Bellman recursion. Ties: lexicographically
/// smallest path.
inline PathValue brute_force_path(const SurmiseRelation& rel, const ExplorationState& start, std::size_t k,
                                  const StateScore& score, OracleBudget budget = kPathBudget) {
  check_budget(rel, budget);
  if (!is_ideal(rel, start.members())) throw Error(ErrorCode::invalid_state, "start is not an ideal");
  PathValue best;
  bool have = false;
  std::vector<std::size_t> path;
  std::vector<double> gains;
  auto consider = [&] {
    double v = 0.0;
    for (std::size_t j = gains.size(); j-- > 0;) v = gains[j] + v;
    if (!have || v > best.value || (v == best.value && path < best.path)) {
      best = {path, v};
      have = true;
    }
  };
  auto rec = [&](auto&& self, const ExplorationState& state, std::size_t remaining) -> void {
    const auto next = remaining == 0 ? std::vector<std::size_t>{} : extensions(rel, state);
    if (next.empty()) {
      consider();
      return;
    }
    for (std::size_t q : next) {
      path.push_back(q);
      gains.push_back(score(q, state));
      self(self, state.with(q), remaining - 1);
      path.pop_back();
      gains.pop_back();
    }
  };
  rec(rec, start, k);
  return best;
}

/// Full-support Bayes update. `prior` must list every ideal.
inline StateDistribution exact_posterior(const StateDistribution& prior, const ResponseVector& responses,
                                         const BlimParams& params, OracleBudget budget = kIdealBudget) {
  const auto& rel = prior.relation();
  check_budget(rel, budget);
  const auto ideals = enumerate_ideals(rel, budget);
  if (prior.size() != ideals.size())
    throw Error(ErrorCode::invalid_argument, "prior must enumerate every ideal");
  if (std::abs(prior.total() - 1.0) > 1e-12) throw Error(ErrorCode::not_normalized, "prior must sum to 1 within 1e-12");
  std::vector<WeightedState> out;
  double z = 0.0;
  for (const auto& k : ideals) {
    double l = 1.0;
    for (const auto& r : responses.entries()) {
      const bool in = k.contains(r.item);
      const double b = params.beta.at(r.item);
      const double e = params.eta.at(r.item);
      double f = 0.0;
      if (params.form == LikelihoodForm::standard)
        f = r.engaged ? (in ? 1.0 - e : b) : (in ? e : 1.0 - b);
      else
        f = r.engaged ? (in ? 1.0 - b : b) : (in ? e : 1.0 - e);
      l *= f;
    }
    const double w = prior.probability(k) * l;
    z += w;
    out.push_back({k, w});
  }
  if (!(z > 0.0)) throw Error(ErrorCode::zero_evidence, "total likelihood mass is zero");
  for (auto& ws : out) ws.probability /= z;
  return StateDistribution(prior.relation_ptr(), std::move(out));
}

}  // namespace esrs::oracle
