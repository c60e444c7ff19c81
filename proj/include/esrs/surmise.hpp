#pragma once
// Surmise-relation inference from visit trajectories.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "esrs/error.hpp"
#include "esrs/lattice.hpp"

namespace esrs {

// ---------------------------------------------------------------------------
// Trajectories

/// Seconds since the epoch for "YYYY-MM-DDTHH:MM[:SS[.fff]][Z|±HH:MM]".
inline std::int64_t parse_iso8601(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, consumed = 0;
  double sec = 0.0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2d%*[T ]%2d:%2d%n", &y, &mo, &d, &h, &mi, &consumed) != 5)
    throw Error(ErrorCode::parse_error, "bad timestamp '" + text + "'");
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < text.size() && text[pos] == ':') {
    int n = 0;
    if (std::sscanf(text.c_str() + pos, ":%lf%n", &sec, &n) != 1)
      throw Error(ErrorCode::parse_error, "bad seconds in '" + text + "'");
    pos += static_cast<std::size_t>(n);
  }
  std::int64_t offset = 0;
  if (pos < text.size()) {
    const char c = text[pos];
    int oh = 0, om = 0;
    if (c == 'Z' && pos + 1 == text.size()) {
    } else if ((c == '+' || c == '-') && std::sscanf(text.c_str() + pos + 1, "%2d:%2d", &oh, &om) == 2) {
      offset = (c == '+' ? 1 : -1) * (oh * 3600 + om * 60);
    } else {
      throw Error(ErrorCode::parse_error, "bad zone in '" + text + "'");
    }
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || sec >= 61.0 || sec < 0.0)
    throw Error(ErrorCode::parse_error, "timestamp out of range '" + text + "'");
  const std::int64_t days = sys_days{ymd}.time_since_epoch().count();
  return days * 86400 + h * 3600 + mi * 60 + static_cast<std::int64_t>(sec) - offset;
}

struct Visit {
  PoiId poi;
  std::string timestamp;
  std::int64_t epoch_seconds = 0;
};

struct Trajectory {
  std::string user_id;
  std::vector<Visit> visits;

  void validate() const {
    if (visits.empty()) throw Error(ErrorCode::invalid_argument, "trajectory of " + user_id + " has no visits");
    for (std::size_t i = 1; i < visits.size(); ++i)
      if (visits[i].epoch_seconds < visits[i - 1].epoch_seconds)
        throw Error(ErrorCode::non_monotone_timestamps,
                    "trajectory of " + user_id + " goes back in time at visit " + std::to_string(i));
  }

  std::vector<PoiId> sequence() const {
    std::vector<PoiId> s;
    for (const auto& v : visits) s.push_back(v.poi);
    return s;
  }
};

/// Timestamps are synthetic (one minute apart), for generated corpora.
inline Trajectory make_trajectory(std::string user_id, std::span<const PoiId> sequence) {
  Trajectory t{std::move(user_id), {}};
  std::int64_t at = 1'700'000'000;
  for (const auto& p : sequence) {
    t.visits.push_back({p, "", at});
    at += 60;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Pair mining

enum class PrecedencePolicy {
  first_before_some,   // first(a) < last(b); repeats can count both orders
  first_before_first,  // first(a) < first(b)
};

enum class EdgeStatus { accepted, flagged, removed };

inline std::string to_string(EdgeStatus s) {
  switch (s) {
    case EdgeStatus::accepted: return "accepted";
    case EdgeStatus::flagged: return "flagged";
    case EdgeStatus::removed: return "removed";
  }
  return "removed";
}

inline EdgeStatus edge_status_from_string(const std::string& s) {
  if (s == "accepted") return EdgeStatus::accepted;
  if (s == "flagged") return EdgeStatus::flagged;
  if (s == "removed") return EdgeStatus::removed;
  throw Error(ErrorCode::parse_error, "unknown edge status '" + s + "'");
}

struct CandidateEdge {
  PoiId a;
  PoiId b;
  std::size_t n_a = 0;
  std::size_t n_ab = 0;
  double confidence = 0.0;
  double p_value = 1.0;
  EdgeStatus status = EdgeStatus::accepted;
  std::string reason;
};

struct MinedPairs {
  std::map<PoiId, std::size_t> item_support;  // n_a
  std::vector<CandidateEdge> pairs;           // sorted by (a, b)
};

inline MinedPairs mine_pairs(std::span<const Trajectory> trajectories, std::size_t sigma,
                             PrecedencePolicy policy = PrecedencePolicy::first_before_some) {
  MinedPairs out;
  std::map<std::pair<PoiId, PoiId>, std::size_t> counts;
  for (const auto& t : trajectories) {
    std::map<PoiId, std::pair<std::size_t, std::size_t>> span;  // first, last
    for (std::size_t i = 0; i < t.visits.size(); ++i) {
      auto [it, fresh] = span.try_emplace(t.visits[i].poi, i, i);
      if (!fresh) it->second.second = i;
    }
    for (const auto& [a, sa] : span) {
      ++out.item_support[a];
      for (const auto& [b, sb] : span) {
        if (a == b) continue;
        const std::size_t later = policy == PrecedencePolicy::first_before_some ? sb.second : sb.first;
        if (sa.first < later) ++counts[{a, b}];
      }
    }
  }
  for (const auto& [ab, n] : counts) {
    if (n < sigma || n == 0) continue;
    CandidateEdge e;
    e.a = ab.first;
    e.b = ab.second;
    e.n_ab = n;
    e.n_a = out.item_support[ab.first];
    e.confidence = static_cast<double>(n) / static_cast<double>(e.n_a);
    out.pairs.push_back(std::move(e));
  }
  return out;
}

/// P[X ≥ k] for X ~ Binomial(n, p), summed in log space.
inline double binom_test(std::size_t k, std::size_t n, double p) {
  if (k > n || n == 0) throw Error(ErrorCode::invalid_argument, "binom_test needs 0 <= k <= n, n >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::out_of_range, "binom_test p outside [0,1]");
  if (k == 0) return 1.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double lp = std::log(p), lq = std::log1p(-p);
  const double ln = std::lgamma(static_cast<double>(n) + 1.0);
  std::vector<double> terms;
  for (std::size_t i = k; i <= n; ++i) {
    const double di = static_cast<double>(i);
    terms.push_back(ln - std::lgamma(di + 1.0) - std::lgamma(static_cast<double>(n - i) + 1.0) + di * lp +
                    static_cast<double>(n - i) * lq);
  }
  const double m = *std::max_element(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return std::min(1.0, std::exp(m + std::log(s)));
}

// ---------------------------------------------------------------------------
// Cycle resolution

namespace detail {

/// Tarjan over the active edges; returns component id per node.
inline std::vector<std::size_t> strongly_connected(std::size_t n, const std::vector<std::vector<std::size_t>>& adj) {
  std::vector<std::size_t> index(n, SIZE_MAX), low(n, 0), comp(n, SIZE_MAX), stack;
  std::vector<bool> on(n, false);
  std::size_t counter = 0, ncomp = 0;
  auto visit = [&](auto&& self, std::size_t v) -> void {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on[v] = true;
    for (std::size_t w : adj[v]) {
      if (index[w] == SIZE_MAX) {
        self(self, w);
        low[v] = std::min(low[v], low[w]);
      } else if (on[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on[w] = false;
        comp[w] = ncomp;
      } while (w != v);
      ++ncomp;
    }
  };
  for (std::size_t v = 0; v < n; ++v)
    if (index[v] == SIZE_MAX) visit(visit, v);
  return comp;
}

}  // namespace detail

/// Mutual pairs keep the more confident direction (both go on a tie); then
/// each remaining multi-node strongly connected component keeps only its
/// most confident edge. Only `accepted` edges take part.
inline std::vector<CandidateEdge> resolve_cycles(std::vector<CandidateEdge> cand) {
  std::map<std::pair<PoiId, PoiId>, std::size_t> at;
  for (std::size_t i = 0; i < cand.size(); ++i)
    if (cand[i].status == EdgeStatus::accepted) at[{cand[i].a, cand[i].b}] = i;

  std::vector<std::size_t> drop;
  for (const auto& [ab, i] : at) {
    auto rev = at.find({ab.second, ab.first});
    if (rev == at.end()) continue;
    const double c = cand[i].confidence, cr = cand[rev->second].confidence;
    if (c < cr) {
      drop.push_back(i);
      cand[i].reason = "reverse direction more confident";
    } else if (c == cr) {
      drop.push_back(i);
      cand[i].reason = "tied with reverse direction";
    }
  }
  for (std::size_t i : drop) cand[i].status = EdgeStatus::removed;

  std::map<PoiId, std::size_t> node;
  for (const auto& e : cand)
    if (e.status == EdgeStatus::accepted) {
      node.try_emplace(e.a, node.size());
      node.try_emplace(e.b, node.size());
    }
  std::vector<std::vector<std::size_t>> adj(node.size());
  for (const auto& e : cand)
    if (e.status == EdgeStatus::accepted) adj[node[e.a]].push_back(node[e.b]);
  const auto comp = detail::strongly_connected(node.size(), adj);

  std::map<std::size_t, std::size_t> keeper;  // component → best edge
  for (std::size_t i = 0; i < cand.size(); ++i) {
    const auto& e = cand[i];
    if (e.status != EdgeStatus::accepted) continue;
    const std::size_t c = comp[node[e.a]];
    if (c != comp[node[e.b]]) continue;
    auto it = keeper.find(c);
    if (it == keeper.end()) {
      keeper[c] = i;
      continue;
    }
    const auto& k = cand[it->second];
    if (e.confidence > k.confidence || (e.confidence == k.confidence && std::tie(e.a, e.b) < std::tie(k.a, k.b)))
      it->second = i;
  }
  for (std::size_t i = 0; i < cand.size(); ++i) {
    auto& e = cand[i];
    if (e.status != EdgeStatus::accepted) continue;
    const std::size_t c = comp[node[e.a]];
    if (c == comp[node[e.b]] && keeper[c] != i) {
      e.status = EdgeStatus::removed;
      e.reason = "cycle";
    }
  }
  return cand;
}

// ---------------------------------------------------------------------------
// Batch inference

struct InferenceConfig {
  std::size_t min_support = 20;
  double tau_c = 0.6;
  double alpha = 0.01;
  double tau_high = 0.9;
  PrecedencePolicy policy = PrecedencePolicy::first_before_some;

  void validate() const {
    if (!(tau_c > 0.0 && tau_c < 1.0)) throw Error(ErrorCode::out_of_range, "tau_c must lie in (0,1)");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::out_of_range, "alpha must lie in (0,1)");
    if (!(tau_high >= tau_c && tau_high <= 1.0)) throw Error(ErrorCode::out_of_range, "tau_high must lie in [tau_c,1]");
  }
};

/// Reviewer decisions keyed by (a, b).
using ReviewDecisions = std::map<std::pair<PoiId, PoiId>, EdgeStatus>;

struct InferenceResult {
  SurmiseRelation relation;
  std::vector<CandidateEdge> candidates;  // every mined pair with its fate
  std::vector<CandidateEdge> flags;       // awaiting review
};

/// Applies ĉ ≥ τ_c and p ≤ α; failing pairs are marked removed.
inline void threshold_candidates(std::vector<CandidateEdge>& cand, const InferenceConfig& cfg) {
  for (auto& e : cand) {
    e.p_value = binom_test(e.n_ab, e.n_a, cfg.tau_c);
    if (e.confidence < cfg.tau_c) {
      e.status = EdgeStatus::removed;
      e.reason = "confidence below threshold";
    } else if (e.p_value > cfg.alpha) {
      e.status = EdgeStatus::removed;
      e.reason = "not significant";
    } else {
      e.status = EdgeStatus::accepted;
    }
  }
}

inline void apply_review(std::vector<CandidateEdge>& cand, const InferenceConfig& cfg, const ReviewDecisions& review) {
  for (auto& e : cand) {
    if (e.status != EdgeStatus::accepted || e.confidence >= cfg.tau_high) continue;
    auto it = review.find({e.a, e.b});
    if (it != review.end() && it->second == EdgeStatus::accepted) continue;
    if (it != review.end() && it->second == EdgeStatus::removed) {
      e.status = EdgeStatus::removed;
      e.reason = "rejected in review";
    } else {
      e.status = EdgeStatus::flagged;
      e.reason = "confidence below review threshold";
    }
  }
}

/// mine → threshold → resolve cycles → review filter → closure. `items` adds
/// POIs that may be absent from the corpus.
inline InferenceResult infer_surmise(std::span<const Trajectory> trajectories, const InferenceConfig& cfg,
                                     std::span<const PoiId> items = {}, const ReviewDecisions& review = {}) {
  cfg.validate();
  std::set<PoiId> universe(items.begin(), items.end());
  for (const auto& t : trajectories)
    for (const auto& v : t.visits) universe.insert(v.poi);
  if (universe.empty()) throw Error(ErrorCode::empty_domain, "no items to relate");

  auto mined = mine_pairs(trajectories, cfg.min_support, cfg.policy);
  threshold_candidates(mined.pairs, cfg);
  auto cand = resolve_cycles(std::move(mined.pairs));
  apply_review(cand, cfg, review);

  std::vector<IdEdge> edges;
  std::vector<CandidateEdge> flags;
  for (const auto& e : cand) {
    if (e.status == EdgeStatus::accepted) edges.emplace_back(e.a, e.b);
    if (e.status == EdgeStatus::flagged) flags.push_back(e);
  }
  auto rel = SurmiseRelation::build(std::vector<PoiId>(universe.begin(), universe.end()), edges);
  return {std::move(rel), std::move(cand), std::move(flags)};
}

// ---------------------------------------------------------------------------
// Incremental maintenance

struct EdgeConflict {
  PoiId a;
  PoiId b;
  std::string reason;
};

struct IncrementalResult {
  SurmiseRelation relation;
  std::vector<IdEdge> added;
  std::vector<IdEdge> implied;
  std::vector<EdgeConflict> conflicts;
  std::vector<std::size_t> invalidated_sessions;  // indices into the counters span
};

/// Adds each edge unless implied or contradicted, then pushes the Hasse
/// difference into every session's counters.
inline IncrementalResult add_edges(const SurmiseRelation& rel, std::span<const IdEdge> edges,
                                   std::span<FringeCounters> sessions = {}) {
  IncrementalResult out{rel, {}, {}, {}, {}};
  for (const auto& [a_id, b_id] : edges) {
    const auto a = rel.find(a_id), b = rel.find(b_id);
    if (!a || !b) {
      out.conflicts.push_back({a_id, b_id, "unknown item"});
      continue;
    }
    if (out.relation.leq(*a, *b)) {
      out.implied.emplace_back(a_id, b_id);
      continue;
    }
    if (out.relation.leq(*b, *a)) {
      out.conflicts.push_back({a_id, b_id, "reverse order already holds"});
      continue;
    }
    try {
      out.relation = out.relation.with_edge(*a, *b);
      out.added.emplace_back(a_id, b_id);
    } catch (const Error& e) {
      out.conflicts.push_back({a_id, b_id, e.what()});
    }
  }

  const auto before = rel.hasse_edges(), after = out.relation.hasse_edges();
  const std::set<IndexEdge> old_set(before.begin(), before.end()), new_set(after.begin(), after.end());
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    bool ok = true;
    for (const auto& e : old_set)
      if (!new_set.count(e)) ok = sessions[s].apply_cover_delta(e.first, e.second, -1) && ok;
    for (const auto& e : new_set)
      if (!old_set.count(e)) ok = sessions[s].apply_cover_delta(e.first, e.second, +1) && ok;
    if (!ok) out.invalidated_sessions.push_back(s);
  }
  return out;
}

/// Mines Δ with the batch thresholds and review filter, then adds survivors
/// in order of decreasing confidence.
inline IncrementalResult incremental_update(const SurmiseRelation& rel, std::span<const Trajectory> delta,
                                            const InferenceConfig& cfg, std::span<FringeCounters> sessions = {},
                                            const ReviewDecisions& review = {}) {
  cfg.validate();
  auto mined = mine_pairs(delta, cfg.min_support, cfg.policy);
  threshold_candidates(mined.pairs, cfg);
  auto cand = resolve_cycles(std::move(mined.pairs));
  apply_review(cand, cfg, review);
  std::vector<CandidateEdge> keep;
  for (auto& e : cand)
    if (e.status == EdgeStatus::accepted) keep.push_back(e);
  std::stable_sort(keep.begin(), keep.end(), [](const auto& x, const auto& y) { return x.confidence > y.confidence; });
  std::vector<IdEdge> edges;
  for (const auto& e : keep) edges.emplace_back(e.a, e.b);
  return add_edges(rel, edges, sessions);
}

// ---------------------------------------------------------------------------
// Review file: JSON array of candidate edges

inline nlohmann::json to_json(const CandidateEdge& e) {
  return {{"a", e.a},
          {"b", e.b},
          {"n_a", e.n_a},
          {"n_ab", e.n_ab},
          {"confidence", e.confidence},
          {"p_value", e.p_value},
          {"status", to_string(e.status)},
          {"reason", e.reason}};
}

inline CandidateEdge candidate_from_json(const nlohmann::json& j) {
  try {
    CandidateEdge e;
    e.a = j.at("a").get<std::string>();
    e.b = j.at("b").get<std::string>();
    e.n_a = j.value("n_a", std::size_t{0});
    e.n_ab = j.value("n_ab", std::size_t{0});
    e.confidence = j.value("confidence", 0.0);
    e.p_value = j.value("p_value", 1.0);
    e.status = edge_status_from_string(j.value("status", std::string("flagged")));
    e.reason = j.value("reason", std::string());
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::parse_error, ex.what());
  }
}

inline void save_review_file(const std::string& path, std::span<const CandidateEdge> edges) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : edges) arr.push_back(to_json(e));
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::parse_error, "cannot write " + path);
  f << arr.dump(2) << '\n';
}

inline ReviewDecisions load_review_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::parse_error, "cannot read " + path);
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::parse_error, ex.what());
  }
  if (!arr.is_array()) throw Error(ErrorCode::parse_error, "review file must be a JSON array");
  ReviewDecisions out;
  for (const auto& j : arr) {
    auto e = candidate_from_json(j);
    out[{e.a, e.b}] = e.status;
  }
  return out;
}

}  // namespace esrs
