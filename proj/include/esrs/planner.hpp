#pragma once
// Path planning over the ideal lattice (memoized Bellman recursion), MMR
// diversified ranking, structural serendipity and structural explanations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "esrs/error.hpp"
#include "esrs/geo.hpp"
#include "esrs/lattice.hpp"
#include "esrs/user_model.hpp"

namespace esrs {

struct PlanRequest {
  ExplorationState start;
  std::size_t horizon = 0;
  std::optional<std::size_t> beam;  // unset = unbounded
};

struct MemoEntry {
  ExplorationState state;
  std::size_t horizon = 0;
  std::int64_t elapsed = -1;  // minute bucket; -1 when untimed
  double value = 0.0;
  std::optional<std::size_t> pred;
};

struct PlanResult {
  std::vector<std::size_t> path;
  double value = 0.0;
  std::vector<MemoEntry> trace;                // memo writes, in order
  std::vector<std::size_t> evaluations;        // memo misses per remaining horizon
  bool beam_limited = false;                   // some node was cut to top-B
  bool infeasible_budget = false;              // timed: no first step fits
};

struct TimeBudget {
  double max_minutes = std::numeric_limits<double>::infinity();
  std::vector<double> durations;  // per item, minutes
  // travel(K, q) in minutes, ≥ 0
  std::function<double(const ExplorationState&, std::size_t)> travel = [](const ExplorationState&, std::size_t) {
    return 0.0;
  };
};

namespace detail {

struct MemoKey {
  ExplorationState state;
  std::size_t horizon;
  std::int64_t elapsed;
  friend bool operator==(const MemoKey&, const MemoKey&) = default;
};

struct MemoKeyHash {
  std::size_t operator()(const MemoKey& k) const noexcept {
    std::size_t h = k.state.members().hash();
    h ^= std::hash<std::size_t>{}(k.horizon) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h ^= std::hash<std::int64_t>{}(k.elapsed) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }
};

template <class Score>
class BellmanSolver {
 public:
  BellmanSolver(const SurmiseRelation& rel, Score& score, std::optional<std::size_t> beam, const TimeBudget* budget)
      : rel_(rel), score_(score), beam_(beam), budget_(budget) {}

  PlanResult solve(const ExplorationState& start, std::size_t horizon) {
    require_valid(rel_, start);
    if (beam_ && *beam_ == 0) throw Error(ErrorCode::invalid_argument, "beam width must be at least 1");
    result_.evaluations.assign(horizon + 1, 0);
    const std::int64_t t0 = budget_ ? 0 : -1;
    result_.value = value(start, horizon, t0);

    ExplorationState k = start;
    std::size_t j = horizon;
    std::int64_t t = t0;
    while (j > 0) {
      auto it = memo_.find({k, j, t});
      if (it == memo_.end() || !result_.trace[it->second].pred) break;
      const std::size_t q = *result_.trace[it->second].pred;
      result_.path.push_back(q);
      if (budget_) t = next_time(k, q, t);
      k = k.with(q);
      --j;
    }
    if (budget_ && horizon > 0 && result_.path.empty() && !fringe(rel_, start).empty())
      result_.infeasible_budget = true;
    return std::move(result_);
  }

 private:
  double step_cost(const ExplorationState& k, std::size_t q) const {
    return budget_->durations.at(q) + budget_->travel(k, q);
  }
  std::int64_t next_time(const ExplorationState& k, std::size_t q, std::int64_t t) const {
    return static_cast<std::int64_t>(std::ceil(static_cast<double>(t) + step_cost(k, q) - 1e-9));
  }

  std::vector<std::size_t> candidates(const ExplorationState& k, std::int64_t t) {
    std::vector<std::size_t> c;
    fringe(rel_, k).for_each([&](std::size_t q) {
      if (!budget_ || static_cast<double>(t) + step_cost(k, q) <= budget_->max_minutes) c.push_back(q);
    });
    if (beam_ && c.size() > *beam_) {
      std::vector<std::pair<double, std::size_t>> scored;
      for (std::size_t q : c) scored.emplace_back(score_(q, k), q);
      std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      c.clear();
      for (std::size_t i = 0; i < *beam_; ++i) c.push_back(scored[i].second);
      std::sort(c.begin(), c.end());
      result_.beam_limited = true;
    }
    return c;
  }

  double value(const ExplorationState& k, std::size_t j, std::int64_t t) {
    MemoKey key{k, j, t};
    if (auto it = memo_.find(key); it != memo_.end()) return result_.trace[it->second].value;
    ++result_.evaluations[j];

    double best = 0.0;
    std::optional<std::size_t> pred;
    if (j > 0) {
      for (std::size_t q : candidates(k, t)) {
        const double nt_value = value(k.with(q), j - 1, budget_ ? next_time(k, q, t) : t);
        const double v = score_(q, k) + nt_value;
        if (!pred || v > best) {
          best = v;
          pred = q;
        }
      }
    }
    if (memo_.count(key) != 0) throw std::logic_error("memo entry written twice");
    memo_.emplace(key, result_.trace.size());
    result_.trace.push_back({k, j, t, best, pred});
    return best;
  }

  const SurmiseRelation& rel_;
  Score& score_;
  std::optional<std::size_t> beam_;
  const TimeBudget* budget_;
  std::unordered_map<MemoKey, std::size_t, MemoKeyHash> memo_;
  PlanResult result_;
};

}  // namespace detail

/// V(K,0) = 0; V(K,j) = 0 on an empty fringe; otherwise
/// V(K,j) = max_{q ∈ Fringe(K)} [score(q,K) + V(K ∪ {q}, j−1)].
/// Each (K, j) is evaluated once; ties go to the smallest item id. With a
/// finite beam only the top-B fringe items by immediate score are expanded.
template <class Score>
PlanResult plan_path(const SurmiseRelation& rel, const PlanRequest& req, Score&& score) {
  detail::BellmanSolver<std::remove_reference_t<Score>> solver(rel, score, req.beam, nullptr);
  return solver.solve(req.start, req.horizon);
}

/// Same recursion on (K, elapsed, j); a step is feasible when
/// elapsed + dur(q) + travel(K, q) ≤ T_max. Elapsed time is carried in whole
/// minutes, rounded up.
template <class Score>
PlanResult plan_path_timed(const SurmiseRelation& rel, const PlanRequest& req, const TimeBudget& budget, Score&& score) {
  if (budget.durations.size() != rel.size())
    throw Error(ErrorCode::invalid_argument, "durations must cover every item");
  detail::BellmanSolver<std::remove_reference_t<Score>> solver(rel, score, req.beam, &budget);
  return solver.solve(req.start, req.horizon);
}

// ---------------------------------------------------------------------------
// Diversified ranking

/// sim_cat and distance over a fixed item set, filled once per request.
class PairwiseTables {
 public:
  PairwiseTables() = default;

  static PairwiseTables build(std::span<const std::size_t> items, std::span<const PoiAttributes> pois) {
    PairwiseTables t;
    t.items_.assign(items.begin(), items.end());
    const std::size_t m = items.size();
    t.sim_.assign(m * m, 0.0);
    t.dist_.assign(m * m, 0.0);
    for (std::size_t a = 0; a < m; ++a) {
      t.slot_[items[a]] = a;
      for (std::size_t b = 0; b < m; ++b) {
        const auto& pa = pois[items[a]];
        const auto& pb = pois[items[b]];
        t.sim_[a * m + b] = jaccard(pa.categories, pb.categories);
        t.dist_[a * m + b] = distance_km(pa, pb);
      }
    }
    return t;
  }

  void set(std::size_t a, std::size_t b, double sim_cat, double dist_km) {
    const std::size_t sa = ensure(a), sb = ensure(b);
    const std::size_t m = items_.size();
    sim_[sa * m + sb] = sim_[sb * m + sa] = sim_cat;
    dist_[sa * m + sb] = dist_[sb * m + sa] = dist_km;
  }

  std::pair<double, double> at(std::size_t a, std::size_t b) const {
    auto ia = slot_.find(a), ib = slot_.find(b);
    if (ia == slot_.end() || ib == slot_.end())
      throw Error(ErrorCode::missing_pair_entry, "no pairwise entry for (" + std::to_string(a) + ", " + std::to_string(b) + ")");
    const std::size_t m = items_.size();
    return {sim_[ia->second * m + ib->second], dist_[ia->second * m + ib->second]};
  }

 private:
  std::size_t ensure(std::size_t item) {
    if (auto it = slot_.find(item); it != slot_.end()) return it->second;
    const std::size_t old = items_.size(), m = old + 1;
    std::vector<double> sim(m * m, 0.0), dist(m * m, 0.0);
    for (std::size_t a = 0; a < old; ++a)
      for (std::size_t b = 0; b < old; ++b) {
        sim[a * m + b] = sim_[a * old + b];
        dist[a * m + b] = dist_[a * old + b];
      }
    sim[old * m + old] = 1.0;
    sim_ = std::move(sim);
    dist_ = std::move(dist);
    items_.push_back(item);
    slot_[item] = old;
    return old;
  }

  std::vector<std::size_t> items_;
  std::map<std::size_t, std::size_t> slot_;
  std::vector<double> sim_;
  std::vector<double> dist_;
};

/// D(c, R) = 1 − mean_{r ∈ R} sim_cat(c, r) · exp(−λ dist(c, r)); 1 for empty R.
inline double diversity(std::size_t candidate, std::span<const std::size_t> selected, const PairwiseTables& tables,
                        double lambda = 1.0) {
  if (selected.empty()) return 1.0;
  double acc = 0.0;
  for (std::size_t r : selected) {
    const auto [sim, dist] = tables.at(candidate, r);
    acc += sim * std::exp(-lambda * dist);
  }
  return 1.0 - acc / static_cast<double>(selected.size());
}

struct RankWeights {
  double interest = 1.0;
  double novelty = 0.0;
  double diversity = 0.0;

  void validate() const {
    if (interest < 0 || novelty < 0 || diversity < 0 || std::abs(interest + novelty + diversity - 1.0) > kWeightTolerance)
      throw Error(ErrorCode::weights_not_normalized, "ranking weights must be non-negative and sum to 1");
  }
};

struct RankedItem {
  std::size_t poi = 0;
  double interest = 0.0;
  double diversity = 0.0;
  double novelty = 0.0;
  double total = 0.0;
  bool serendipitous = false;
};

/// Fringe item in an unvisited category (no tag shared with the state) that
/// has at least one strict prerequisite.
inline bool is_serendipitous(const SurmiseRelation& rel, std::size_t poi, const ExplorationState& state,
                             std::span<const std::string> visited_cats, std::span<const std::string> poi_cats) {
  if (!fringe(rel, state).contains(poi)) throw Error(ErrorCode::not_in_fringe, rel.id(poi));
  if (rel.down(poi).count() < 2) return false;
  for (const auto& c : poi_cats)
    if (std::find(visited_cats.begin(), visited_cats.end(), c) != visited_cats.end()) return false;
  return true;
}

/// Greedy MMR over the fringe: at each step pick the argmax of
/// w_I·I + w_N·(1 − Pop) + w_D·D(·, selected); ties to the smaller id.
template <class Interest>
std::vector<RankedItem> diversified_rank(const SurmiseRelation& rel, const ExplorationState& state,
                                         std::span<const PoiAttributes> pois, std::size_t k_max, const RankWeights& w,
                                         Interest&& interest, double lambda = 1.0) {
  w.validate();
  const IndexSet f = fringe(rel, state);
  const std::vector<std::size_t> items = f.indices();
  const PairwiseTables tables = PairwiseTables::build(items, pois);
  const auto visited = visited_categories(pois, state);

  std::map<std::size_t, double> interest_of;
  for (std::size_t q : items) interest_of[q] = interest(q);

  std::vector<RankedItem> out;
  std::vector<std::size_t> selected;
  std::vector<std::size_t> remaining = items;
  while (out.size() < k_max && !remaining.empty()) {
    RankedItem best;
    std::size_t best_pos = remaining.size();
    for (std::size_t pos = 0; pos < remaining.size(); ++pos) {
      const std::size_t q = remaining[pos];
      RankedItem r;
      r.poi = q;
      r.interest = interest_of[q];
      r.novelty = 1.0 - pois[q].popularity;
      r.diversity = diversity(q, selected, tables, lambda);
      r.total = w.interest * r.interest + w.novelty * r.novelty + w.diversity * r.diversity;
      if (best_pos == remaining.size() || r.total > best.total) {
        best = r;
        best_pos = pos;
      }
    }
    best.serendipitous = is_serendipitous(rel, best.poi, state, visited, pois[best.poi].categories);
    out.push_back(best);
    selected.push_back(best.poi);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best_pos));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Explanations

using EdgeTexts = std::map<IndexEdge, std::string>;

struct Justification {
  std::size_t from = 0;
  std::size_t to = 0;
  std::string text;
  bool generated = false;  // no stored text; filled from the template
};

struct Explanation {
  std::size_t target = 0;
  std::vector<std::size_t> chain;  // prerequisite chain, bottom first
  std::vector<Justification> justifications;
  std::string summary;
};

/// Longest chain in ↓poi \ {poi} (ties: lexicographically smallest id
/// sequence), with each covering step and the final link to `poi` annotated.
inline Explanation build_explanation(const SurmiseRelation& rel, std::size_t poi, const ExplorationState& state,
                                     const EdgeTexts& texts = {}) {
  if (!fringe(rel, state).contains(poi)) throw Error(ErrorCode::not_in_fringe, rel.id(poi));
  Explanation e;
  e.target = poi;
  IndexSet below = rel.down(poi);
  below.erase(poi);
  if (below.empty()) {
    e.summary = rel.id(poi) + " is accessible to any user without prior visits.";
    return e;
  }
  // best[x]: longest, then lexicographically smallest, chain ending at x.
  std::map<std::size_t, std::vector<std::size_t>> best;
  auto better = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return a.size() != b.size() ? a.size() > b.size() : a < b;
  };
  for (std::size_t x : detail::topological_order(rel, below.indices())) {
    std::vector<std::size_t> chain;
    for (std::size_t y : rel.lower_covers(x)) {
      if (!best.count(y)) continue;
      if (chain.empty() || better(best[y], chain)) chain = best[y];
    }
    chain.push_back(x);
    best[x] = std::move(chain);
  }
  for (std::size_t top : rel.lower_covers(poi))
    if (e.chain.empty() || better(best[top], e.chain)) e.chain = best[top];

  auto annotate = [&](std::size_t a, std::size_t b) {
    auto it = texts.find({a, b});
    if (it != texts.end())
      e.justifications.push_back({a, b, it->second, false});
    else
      e.justifications.push_back({a, b, "Visiting " + rel.id(a) + " prepares you for " + rel.id(b) + ".", true});
  };
  for (std::size_t i = 0; i + 1 < e.chain.size(); ++i) annotate(e.chain[i], e.chain[i + 1]);
  annotate(e.chain.back(), poi);

  std::string path;
  for (std::size_t x : e.chain) path += rel.id(x) + " -> ";
  e.summary = "Recommended after " + path + rel.id(poi) + ".";
  (void)state;
  return e;
}

}  // namespace esrs
