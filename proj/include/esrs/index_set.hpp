#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

namespace esrs {

// Fixed-universe bitset over item indices [0, universe).
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::size_t universe) : universe_(universe), words_((universe + 63) / 64, 0) {}

  std::size_t universe() const noexcept { return universe_; }

  bool contains(std::size_t i) const noexcept {
    return i < universe_ && ((words_[i >> 6] >> (i & 63)) & 1u) != 0;
  }
  void insert(std::size_t i) noexcept { words_[i >> 6] |= (std::uint64_t{1} << (i & 63)); }
  void erase(std::size_t i) noexcept { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

  std::size_t count() const noexcept {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  bool empty() const noexcept {
    for (auto w : words_)
      if (w != 0) return false;
    return true;
  }

  IndexSet& operator|=(const IndexSet& o) noexcept {
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= o.words_[k];
    return *this;
  }
  IndexSet& operator&=(const IndexSet& o) noexcept {
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] &= o.words_[k];
    return *this;
  }
  // Set difference.
  IndexSet& operator-=(const IndexSet& o) noexcept {
    for (std::size_t k = 0; k < words_.size(); ++k) words_[k] &= ~o.words_[k];
    return *this;
  }
  friend IndexSet operator|(IndexSet a, const IndexSet& b) noexcept { return a |= b; }
  friend IndexSet operator&(IndexSet a, const IndexSet& b) noexcept { return a &= b; }
  friend IndexSet operator-(IndexSet a, const IndexSet& b) noexcept { return a -= b; }

  bool is_subset_of(const IndexSet& o) const noexcept {
    for (std::size_t k = 0; k < words_.size(); ++k)
      if ((words_[k] & ~o.words_[k]) != 0) return false;
    return true;
  }

  template <class F>
  void for_each(F&& f) const {
    for (std::size_t k = 0; k < words_.size(); ++k) {
      std::uint64_t w = words_[k];
      while (w != 0) {
        const auto bit = static_cast<std::size_t>(std::countr_zero(w));
        f(k * 64 + bit);
        w &= w - 1;
      }
    }
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    out.reserve(count());
    for_each([&](std::size_t i) { out.push_back(i); });
    return out;
  }

  std::size_t hash() const noexcept {
    std::size_t h = universe_ * 0x9e3779b97f4a7c15ULL;
    for (auto w : words_) h ^= std::hash<std::uint64_t>{}(w) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
  }

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

  // Lexicographic order on the ascending member sequences. Because items are
  // indexed in sorted-id order this is the canonical state order.
  friend bool canonical_less(const IndexSet& a, const IndexSet& b) noexcept {
    const std::size_t n = a.words_.size();
    for (std::size_t k = 0; k < n; ++k) {
      const std::uint64_t diff = a.words_[k] ^ b.words_[k];
      if (diff == 0) continue;
      const auto bit = static_cast<unsigned>(std::countr_zero(diff));
      const bool a_has = ((a.words_[k] >> bit) & 1u) != 0;
      const IndexSet& other = a_has ? b : a;
      // Does `other` have any member above the differing position?
      bool other_has_more = bit < 63 && (other.words_[k] >> (bit + 1)) != 0;
      for (std::size_t j = k + 1; !other_has_more && j < n; ++j) other_has_more = other.words_[j] != 0;
      return a_has ? other_has_more : !other_has_more;
    }
    return false;
  }

 private:
  std::size_t universe_ = 0;
  std::vector<std::uint64_t> words_;
};

struct IndexSetHash {
  std::size_t operator()(const IndexSet& s) const noexcept { return s.hash(); }
};

}  // namespace esrs
