#pragma once
// Surmise relation (a partial order over POIs), its Hasse diagram, and the
// lattice of order ideals ("exploration states") it generates.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "esrs/error.hpp"
#include "esrs/index_set.hpp"

namespace esrs {

using PoiId = std::string;
using IdEdge = std::pair<PoiId, PoiId>;
using IndexEdge = std::pair<std::size_t, std::size_t>;

// A set of items, meant to be downward closed under its owning relation.
class ExplorationState {
 public:
  ExplorationState() = default;
  explicit ExplorationState(IndexSet members) : members_(std::move(members)) {}

  const IndexSet& members() const noexcept { return members_; }
  bool contains(std::size_t i) const noexcept { return members_.contains(i); }
  std::size_t size() const noexcept { return members_.count(); }
  bool empty() const noexcept { return members_.empty(); }
  std::vector<std::size_t> indices() const { return members_.indices(); }

  ExplorationState with(std::size_t i) const {
    ExplorationState out = *this;
    out.members_.insert(i);
    return out;
  }

  friend bool operator==(const ExplorationState&, const ExplorationState&) = default;
  friend bool canonical_less(const ExplorationState& a, const ExplorationState& b) noexcept {
    return canonical_less(a.members_, b.members_);
  }

 private:
  IndexSet members_;
};

struct StateHash {
  std::size_t operator()(const ExplorationState& s) const noexcept { return s.members().hash(); }
};

struct CanonicalLess {
  bool operator()(const ExplorationState& a, const ExplorationState& b) const noexcept {
    return canonical_less(a, b);
  }
};

/// Immutable partial order on a finite, non-empty item set.
///
/// Items are stored sorted by id, so item index order is id order and the
/// canonical state order (lexicographic on sorted ids) is a pure bit operation.
/// The closure includes the reflexive pairs; the Hasse diagram does not.
class SurmiseRelation {
 public:
  /// Reflexive-transitive closure of `edges` plus its transitive reduction.
  /// Throws CycleDetected (message lists one cycle), UnknownItem,
  /// DuplicateItem, EmptyDomain.
  static SurmiseRelation build(std::vector<PoiId> items, std::span<const IdEdge> edges) {
    if (items.empty()) throw Error(ErrorCode::empty_domain, "a surmise relation needs at least one item");
    std::sort(items.begin(), items.end());
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].empty()) throw Error(ErrorCode::invalid_argument, "empty item id");
      if (i > 0 && items[i] == items[i - 1]) throw Error(ErrorCode::duplicate_item, items[i]);
    }
    SurmiseRelation rel;
    rel.items_ = std::move(items);
    rel.index_ = make_index(rel.items_);
    const std::size_t n = rel.items_.size();

    std::vector<std::vector<std::uint8_t>> reach(n, std::vector<std::uint8_t>(n, 0));
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i) reach[i][i] = 1;
    for (const auto& [a, b] : edges) {
      const std::size_t ia = rel.index_of(a);
      const std::size_t ib = rel.index_of(b);
      if (ia == ib) continue;
      if (!reach[ia][ib]) adj[ia].push_back(ib);
      reach[ia][ib] = 1;
    }
    // Floyd-Warshall closure.
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        if (reach[i][k])
          for (std::size_t j = 0; j < n; ++j)
            if (reach[k][j]) reach[i][j] = 1;

    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (reach[i][j] && reach[j][i])
          throw Error(ErrorCode::cycle_detected, rel.describe_cycle(adj, i, j));

    rel.down_.assign(n, IndexSet(n));
    rel.up_.assign(n, IndexSet(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (reach[i][j]) {
          rel.down_[j].insert(i);
          rel.up_[i].insert(j);
        }
    rel.derive_hasse();
    return rel;
  }

  static SurmiseRelation build(std::vector<PoiId> items, const std::vector<IdEdge>& edges) {
    return build(std::move(items), std::span<const IdEdge>(edges));
  }

  /// New relation with `a ⪯ b` added; the closure is updated in O(n²) word
  /// operations (every predecessor of a now precedes every successor of b)
  /// and the Hasse diagram is re-reduced. Throws CycleDetected when b ⪯ a.
  SurmiseRelation with_edge(std::size_t a, std::size_t b) const {
    if (a == b || leq(a, b)) return *this;
    if (leq(b, a))
      throw Error(ErrorCode::cycle_detected, items_[a] + " -> " + items_[b] + " -> " + items_[a]);
    SurmiseRelation rel = *this;
    const IndexSet below_a = down_[a];
    const IndexSet above_b = up_[b];
    below_a.for_each([&](std::size_t p) { rel.up_[p] |= above_b; });
    above_b.for_each([&](std::size_t s) { rel.down_[s] |= below_a; });
    rel.derive_hasse();
    return rel;
  }

  std::size_t size() const noexcept { return items_.size(); }
  const std::vector<PoiId>& items() const noexcept { return items_; }
  const PoiId& id(std::size_t i) const { return items_.at(i); }

  std::optional<std::size_t> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t index_of(std::string_view id) const {
    auto found = find(id);
    if (!found) throw Error(ErrorCode::unknown_item, std::string(id));
    return *found;
  }

  /// p ⪯ q (reflexive).
  bool leq(std::size_t p, std::size_t q) const noexcept { return down_[q].contains(p); }
  bool less(std::size_t p, std::size_t q) const noexcept { return p != q && leq(p, q); }

  /// Principal ideal ↓q.
  const IndexSet& down(std::size_t q) const { return down_.at(q); }
  /// Principal filter ↑p.
  const IndexSet& up(std::size_t p) const { return up_.at(p); }

  const std::vector<std::size_t>& lower_covers(std::size_t q) const { return lower_.at(q); }
  const std::vector<std::size_t>& upper_covers(std::size_t p) const { return upper_.at(p); }
  std::size_t hasse_edge_count() const noexcept { return hasse_count_; }

  std::vector<IndexEdge> hasse_edges() const {
    std::vector<IndexEdge> out;
    out.reserve(hasse_count_);
    for (std::size_t p = 0; p < size(); ++p)
      for (std::size_t q : upper_[p]) out.emplace_back(p, q);
    return out;
  }
  std::vector<IdEdge> hasse_edge_ids() const {
    std::vector<IdEdge> out;
    for (const auto& [p, q] : hasse_edges()) out.emplace_back(items_[p], items_[q]);
    return out;
  }
  bool is_covering(std::size_t p, std::size_t q) const {
    const auto& up = upper_.at(p);
    return std::find(up.begin(), up.end(), q) != up.end();
  }

  std::vector<std::size_t> minimal_elements() const {
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < size(); ++q)
      if (lower_[q].empty()) out.push_back(q);
    return out;
  }

  ExplorationState empty_state() const { return ExplorationState(IndexSet(size())); }
  ExplorationState full_state() const {
    IndexSet all(size());
    for (std::size_t i = 0; i < size(); ++i) all.insert(i);
    return ExplorationState(std::move(all));
  }

  /// Set of ids -> state, without validity check. Throws UnknownItem.
  ExplorationState to_state(std::span<const PoiId> ids) const {
    IndexSet s(size());
    for (const auto& id : ids) s.insert(index_of(id));
    return ExplorationState(std::move(s));
  }
  ExplorationState to_state(std::initializer_list<PoiId> ids) const {
    return to_state(std::span<const PoiId>(ids.begin(), ids.size()));
  }
  ExplorationState to_state(std::span<const std::size_t> indices) const {
    IndexSet s(size());
    for (auto i : indices) {
      if (i >= size()) throw Error(ErrorCode::unknown_item, "index " + std::to_string(i));
      s.insert(i);
    }
    return ExplorationState(std::move(s));
  }

  std::vector<PoiId> ids(const ExplorationState& s) const { return ids(s.members()); }
  std::vector<PoiId> ids(const IndexSet& s) const {
    std::vector<PoiId> out;
    s.for_each([&](std::size_t i) { out.push_back(items_[i]); });
    return out;
  }
  std::vector<PoiId> ids(std::span<const std::size_t> seq) const {
    std::vector<PoiId> out;
    for (auto i : seq) out.push_back(items_.at(i));
    return out;
  }

  /// Canonical key: sorted member ids joined with ','.
  std::string key(const ExplorationState& s) const {
    std::string out;
    s.members().for_each([&](std::size_t i) {
      if (!out.empty()) out += ',';
      out += items_[i];
    });
    return out;
  }

 private:
  SurmiseRelation() = default;

  static std::unordered_map<std::string, std::size_t> make_index(const std::vector<PoiId>& items) {
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < items.size(); ++i) idx.emplace(items[i], i);
    return idx;
  }

  // Covering pairs: p ≺ q with no r strictly between.
  void derive_hasse() {
    const std::size_t n = size();
    lower_.assign(n, {});
    upper_.assign(n, {});
    hasse_count_ = 0;
    for (std::size_t q = 0; q < n; ++q) {
      IndexSet strict_below = down_[q];
      strict_below.erase(q);
      strict_below.for_each([&](std::size_t p) {
        IndexSet between = up_[p] & strict_below;
        between.erase(p);
        if (between.empty()) {
          lower_[q].push_back(p);
          upper_[p].push_back(q);
          ++hasse_count_;
        }
      });
    }
    for (auto& v : upper_) std::sort(v.begin(), v.end());
  }

  std::string describe_cycle(const std::vector<std::vector<std::size_t>>& adj, std::size_t i,
                             std::size_t j) const {
    auto path = [&](std::size_t from, std::size_t to) {
      std::vector<std::size_t> parent(size(), size());
      std::vector<std::size_t> queue{from};
      parent[from] = from;
      for (std::size_t h = 0; h < queue.size(); ++h)
        for (std::size_t nb : adj[queue[h]])
          if (parent[nb] == size()) {
            parent[nb] = queue[h];
            queue.push_back(nb);
          }
      std::vector<std::size_t> out;
      for (std::size_t c = to; c != from; c = parent[c]) out.push_back(c);
      std::reverse(out.begin(), out.end());
      return out;
    };
    std::string msg = items_[i];
    for (auto k : path(i, j)) msg += " -> " + items_[k];
    for (auto k : path(j, i)) msg += " -> " + items_[k];
    return msg;
  }

  std::vector<PoiId> items_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<IndexSet> down_;
  std::vector<IndexSet> up_;
  std::vector<std::vector<std::size_t>> lower_;
  std::vector<std::vector<std::size_t>> upper_;
  std::size_t hasse_count_ = 0;
};

inline std::vector<PoiId> principal_ideal(const SurmiseRelation& rel, std::string_view q) {
  return rel.ids(rel.down(rel.index_of(q)));
}

inline bool is_valid_state(const SurmiseRelation& rel, const ExplorationState& state) {
  bool ok = true;
  state.members().for_each([&](std::size_t q) {
    if (ok && !rel.down(q).is_subset_of(state.members())) ok = false;
  });
  return ok;
}

inline bool is_valid_state(const SurmiseRelation& rel, std::span<const PoiId> members) {
  return is_valid_state(rel, rel.to_state(members));
}

inline void require_valid(const SurmiseRelation& rel, const ExplorationState& state) {
  if (state.members().universe() != rel.size() || !is_valid_state(rel, state))
    throw Error(ErrorCode::invalid_state, "{" + rel.key(state) + "} is not an order ideal");
}

/// Fringe(K) = { q ∉ K : every lower cover of q is in K }, in O(n + |E_H|).
inline IndexSet fringe(const SurmiseRelation& rel, const ExplorationState& state) {
  require_valid(rel, state);
  const std::size_t n = rel.size();
  std::vector<std::uint32_t> cnt(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    if (state.contains(p)) continue;
    for (std::size_t q : rel.upper_covers(p)) ++cnt[q];
  }
  IndexSet out(n);
  for (std::size_t q = 0; q < n; ++q)
    if (!state.contains(q) && cnt[q] == 0) out.insert(q);
  return out;
}

/// Per-session fringe bookkeeping: cnt[q] is the number of lower covers of q
/// still outside the state.
class FringeCounters {
 public:
  FringeCounters() = default;
  FringeCounters(const SurmiseRelation& rel, ExplorationState state)
      : state_(std::move(state)), cnt_(rel.size(), 0), fringe_(rel.size()) {
    require_valid(rel, state_);
    for (std::size_t p = 0; p < rel.size(); ++p) {
      if (state_.contains(p)) continue;
      for (std::size_t q : rel.upper_covers(p)) ++cnt_[q];
    }
    for (std::size_t q = 0; q < rel.size(); ++q)
      if (!state_.contains(q) && cnt_[q] == 0) fringe_.insert(q);
  }

  const ExplorationState& state() const noexcept { return state_; }
  const IndexSet& fringe() const noexcept { return fringe_; }
  std::uint32_t count(std::size_t q) const { return cnt_.at(q); }
  const std::vector<std::uint32_t>& counts() const noexcept { return cnt_; }

  /// Moves `added` from the fringe into the state; O(out-degree of added).
  void advance(const SurmiseRelation& rel, std::size_t added) {
    if (!fringe_.contains(added))
      throw Error(ErrorCode::not_in_fringe, rel.id(added) + " is not in the fringe");
    state_ = state_.with(added);
    fringe_.erase(added);
    for (std::size_t s : rel.upper_covers(added)) {
      if (--cnt_[s] == 0 && !state_.contains(s)) fringe_.insert(s);
    }
  }

  /// Applies a covering-edge change p ⋖ q (+1 added, -1 removed).
  /// Returns false, leaving counters untouched, if q is in the state while p
  /// is not (the state would no longer be an ideal).
  bool apply_cover_delta(std::size_t p, std::size_t q, int delta) {
    if (state_.contains(q)) return state_.contains(p);
    if (state_.contains(p)) return true;
    cnt_.at(q) = static_cast<std::uint32_t>(static_cast<int>(cnt_[q]) + delta);
    if (cnt_[q] == 0)
      fringe_.insert(q);
    else
      fringe_.erase(q);
    return true;
  }

 private:
  ExplorationState state_;
  std::vector<std::uint32_t> cnt_;
  IndexSet fringe_;
};

inline FringeCounters fringe_incremental(FringeCounters counters, const SurmiseRelation& rel,
                                         std::size_t added) {
  counters.advance(rel, added);
  return counters;
}

/// Ordering p_1..p_m of the state's members whose every prefix is an ideal,
/// built by repeatedly peeling a maximal element (largest index first).
inline std::vector<std::size_t> well_graded_chain(const SurmiseRelation& rel, const ExplorationState& state) {
  require_valid(rel, state);
  IndexSet rest = state.members();
  std::vector<std::size_t> reversed;
  reversed.reserve(rest.count());
  while (!rest.empty()) {
    std::size_t pick = rel.size();
    rest.for_each([&](std::size_t q) {
      IndexSet above = rel.up(q) & rest;
      above.erase(q);
      if (above.empty()) pick = q;  // keeps the largest maximal index
    });
    rest.erase(pick);
    reversed.push_back(pick);
  }
  return {reversed.rbegin(), reversed.rend()};
}

namespace detail {

inline std::vector<std::size_t> topological_order(const SurmiseRelation& rel, std::span<const std::size_t> items) {
  std::vector<std::size_t> order(items.begin(), items.end());
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rel.down(a).count() < rel.down(b).count();
  });
  return order;
}

// Connected components of the Hasse diagram (undirected).
inline std::vector<std::vector<std::size_t>> components(const SurmiseRelation& rel) {
  const std::size_t n = rel.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [p, q] : rel.hasse_edges()) parent[find(p)] = find(q);
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (slot[r] == n) {
      slot[r] = groups.size();
      groups.emplace_back();
    }
    groups[slot[r]].push_back(i);
  }
  return groups;
}

}  // namespace detail

/// Depth-first enumeration of the ideals restricted to `items` (which must be
/// a union of components). Visits every ideal exactly once; `visit` returns
/// false to stop early.
template <class Visit>
void for_each_ideal(const SurmiseRelation& rel, std::span<const std::size_t> items, Visit&& visit) {
  const auto order = detail::topological_order(rel, items);
  IndexSet current(rel.size());
  bool stop = false;
  auto rec = [&](auto&& self, std::size_t pos) -> void {
    if (stop) return;
    if (pos == order.size()) {
      if (!visit(static_cast<const IndexSet&>(current))) stop = true;
      return;
    }
    const std::size_t q = order[pos];
    self(self, pos + 1);
    bool allowed = true;
    for (std::size_t p : rel.lower_covers(q)) allowed = allowed && current.contains(p);
    if (allowed && !stop) {
      current.insert(q);
      self(self, pos + 1);
      current.erase(q);
    }
  };
  rec(rec, 0);
}

/// |K|: product over connected components; a chain of m items contributes
/// m + 1, any other component is counted exhaustively (at most
/// `max_component` items, else ComponentTooLarge).
inline std::uint64_t count_ideals(const SurmiseRelation& rel, std::size_t max_component = 20) {
  std::uint64_t total = 1;
  for (const auto& comp : detail::components(rel)) {
    std::size_t edges = 0;
    bool chain = true;
    for (std::size_t q : comp) {
      edges += rel.upper_covers(q).size();
      chain = chain && rel.upper_covers(q).size() <= 1 && rel.lower_covers(q).size() <= 1;
    }
    chain = chain && edges + 1 == comp.size();
    std::uint64_t c = 0;
    if (chain) {
      c = comp.size() + 1;
    } else {
      if (comp.size() > max_component)
        throw Error(ErrorCode::component_too_large,
                    std::to_string(comp.size()) + " items in one component (cap " + std::to_string(max_component) + ")");
      for_each_ideal(rel, comp, [&](const IndexSet&) {
        ++c;
        return true;
      });
    }
    if (total > std::numeric_limits<std::uint64_t>::max() / c)
      throw Error(ErrorCode::overflow, "ideal count exceeds 64 bits");
    total *= c;
  }
  return total;
}

/// All ideals, in canonical order, when there are at most `limit` of them.
inline std::optional<std::vector<ExplorationState>> enumerate_ideals_bounded(const SurmiseRelation& rel,
                                                                            std::size_t limit) {
  std::vector<std::size_t> all(rel.size());
  std::iota(all.begin(), all.end(), 0);
  std::vector<ExplorationState> out;
  bool overflowed = false;
  for_each_ideal(rel, all, [&](const IndexSet& s) {
    if (out.size() == limit) {
      overflowed = true;
      return false;
    }
    out.emplace_back(s);
    return true;
  });
  if (overflowed) return std::nullopt;
  std::sort(out.begin(), out.end(), CanonicalLess{});
  return out;
}

}  // namespace esrs
