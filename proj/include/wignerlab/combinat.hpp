#pragma once

// Contraction vectors for iterated contractions of p kernels with q_1..q_p
// variables, the dot-association procedure that turns a scalar contraction
// vector into pairwise association counts alpha_ij, and enumeration of
// non-crossing pairings and partitions.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace wignerlab::combinat {

inline constexpr int kDefaultContractionBound = 40;

/// (q_1, ..., q_p) with p >= 2 and every q_i >= 1.
class BlockProfile {
 public:
  explicit BlockProfile(std::vector<int> q) : q_(std::move(q)) {
    if (q_.size() < 2) throw DomainError("block profile needs p >= 2 blocks");
    for (int v : q_)
      if (v < 1) throw DomainError("block sizes must be >= 1");
  }
  static BlockProfile uniform(int q, int p) { return BlockProfile(std::vector<int>(p, q)); }

  const std::vector<int>& q() const { return q_; }
  int p() const { return static_cast<int>(q_.size()); }
  int total() const { return std::accumulate(q_.begin(), q_.end(), 0); }
  int operator[](std::size_t i) const { return q_[i]; }

 private:
  std::vector<int> q_;
};

/// Strictly upper-triangular p x p table of association counts, 0-based (i < j).
class AlphaMatrix {
 public:
  AlphaMatrix() = default;
  explicit AlphaMatrix(int p) : p_(p), data_(static_cast<std::size_t>(p * p), 0) {}

  int p() const { return p_; }
  int operator()(int i, int j) const { return data_[static_cast<std::size_t>(i * p_ + j)]; }
  int& at(int i, int j) { return data_[static_cast<std::size_t>(i * p_ + j)]; }

  int total() const { return std::accumulate(data_.begin(), data_.end(), 0); }
  /// Associations incident to block k, in either direction.
  int incidence(int k) const {
    int s = 0;
    for (int i = 0; i < p_; ++i) s += i < k ? (*this)(i, k) : i > k ? (*this)(k, i) : 0;
    return s;
  }
  /// Row-major flattening of the entries above the diagonal.
  std::vector<int> flattened() const {
    std::vector<int> out;
    for (int i = 0; i < p_; ++i)
      for (int j = i + 1; j < p_; ++j) out.push_back((*this)(i, j));
    return out;
  }
  bool operator==(const AlphaMatrix&) const = default;

 private:
  int p_ = 0;
  std::vector<int> data_;
};

struct ContractionVector {
  std::vector<int> r;   // r_1..r_{p-1}
  bool scalar = false;  // member of B (fully contracted), not just A
  AlphaMatrix alpha;    // filled only when scalar
};

namespace detail {

/// Number of dots still open after block j (0-based) has been processed.
inline bool in_a(const BlockProfile& profile, const std::vector<int>& r) {
  if (static_cast<int>(r.size()) != profile.p() - 1) return false;
  int open = profile[0];
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (r[k] < 0 || r[k] > profile[k + 1] || r[k] > open) return false;
    open += profile[k + 1] - 2 * r[k];
  }
  return true;
}

inline bool in_b(const BlockProfile& profile, const std::vector<int>& r) {
  if (!in_a(profile, r)) return false;
  return 2 * std::accumulate(r.begin(), r.end(), 0) == profile.total();
}

}  // namespace detail

inline bool in_contraction_set(const BlockProfile& profile, const std::vector<int>& r,
                               bool scalar_only) {
  return scalar_only ? detail::in_b(profile, r) : detail::in_a(profile, r);
}

/// Runs the association rule: block j pairs its r_{j-1} leftmost dots, one at a
/// time, with the rightmost available dot among blocks j-1, j-2, ..., 1.
inline AlphaMatrix alpha_matrix(const BlockProfile& profile, const std::vector<int>& r) {
  if (!detail::in_b(profile, r))
    throw DomainError("alpha_matrix: contraction vector is not in B(q_p)");
  const int p = profile.p();
  AlphaMatrix alpha(p);
  // Available dots of block i form the index range [lo[i], hi[i]).
  std::vector<int> lo(p, 0), hi(profile.q());
  for (int j = 1; j < p; ++j) {
    for (int c = 0; c < r[j - 1]; ++c) {
      ++lo[j];  // leftmost available dot of block j
      int i = j - 1;
      while (i >= 0 && lo[i] == hi[i]) --i;
      if (i < 0) throw DomainError("alpha_matrix: ran out of available dots");
      --hi[i];  // rightmost available dot of the nearest non-exhausted block
      ++alpha.at(i, j);
    }
  }
  return alpha;
}

/// Depth-first enumeration of A(q_p) (or B(q_p) with scalar_only), lexicographic in r.
inline std::vector<ContractionVector> enumerate_contractions(
    const BlockProfile& profile, bool scalar_only, int bound = kDefaultContractionBound) {
  if (profile.total() > bound)
    throw SizeError("enumerate_contractions: sum of q_i = " + std::to_string(profile.total()) +
                    " exceeds the bound " + std::to_string(bound));
  std::vector<ContractionVector> out;
  const int p = profile.p();
  const int total = profile.total();
  if (scalar_only && total % 2 != 0) return out;
  // suffix[k] = q_{k} + ... + q_{p-1} (0-based)
  std::vector<int> suffix(p + 1, 0);
  for (int k = p - 1; k >= 0; --k) suffix[k] = suffix[k + 1] + profile[k];
  std::vector<int> r(p - 1, 0);
  std::function<void(int, int)> dfs = [&](int k, int open) {
    if (k == p - 1) {
      ContractionVector cv;
      cv.r = r;
      cv.scalar = open == 0;
      if (scalar_only && !cv.scalar) return;
      if (cv.scalar) cv.alpha = alpha_matrix(profile, r);
      out.push_back(std::move(cv));
      return;
    }
    const int qk = profile[k + 1];
    for (int v = 0; v <= std::min(qk, open); ++v) {
      const int next_open = open + qk - 2 * v;
      // Every open dot must still find a partner in a later block.
      if (scalar_only && next_open > suffix[k + 2]) continue;
      r[k] = v;
      dfs(k + 1, next_open);
    }
  };
  dfs(0, profile[0]);
  return out;
}

// ---------------------------------------------------------------------------
// Non-crossing structures

enum class NCKind { Pairing, Partition };

inline constexpr int kMaxPairingN = 16;
inline constexpr int kMaxPartitionN = 12;

/// Blocks over {0, ..., n-1}, each sorted, blocks ordered by first element.
struct NCStructure {
  NCKind kind = NCKind::Pairing;
  std::vector<std::vector<int>> blocks;
};

/// True if no a < b < c < d has a, c in one block and b, d in another.
inline bool is_non_crossing(const std::vector<std::vector<int>>& blocks) {
  std::vector<int> owner;
  int n = 0;
  for (const auto& b : blocks)
    for (int v : b) n = std::max(n, v + 1);
  owner.assign(n, -1);
  for (std::size_t k = 0; k < blocks.size(); ++k)
    for (int v : blocks[k]) owner[v] = static_cast<int>(k);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = b + 1; c < n; ++c) {
        if (owner[a] != owner[c] || owner[a] == owner[b]) continue;
        for (int d = c + 1; d < n; ++d)
          if (owner[d] == owner[b]) return false;
      }
  return true;
}

namespace detail {

using Pairs = std::vector<std::pair<int, int>>;

inline void nc_pairings_rec(int lo, int hi, Pairs& cur, std::vector<Pairs>& out,
                            const std::function<void(Pairs&)>& rest) {
  if (lo >= hi) {
    rest(cur);
    return;
  }
  // lo pairs with m; the inside (lo, m) and the outside (m, hi) are independent.
  for (int m = lo + 1; m < hi; m += 2) {
    cur.emplace_back(lo, m);
    nc_pairings_rec(lo + 1, m, cur, out, [&](Pairs& c) { nc_pairings_rec(m + 1, hi, c, out, rest); });
    cur.pop_back();
  }
}

using Blocks = std::vector<std::vector<int>>;

/// All non-crossing partitions of the integer interval [lo, hi).
inline std::vector<Blocks> nc_partitions_of(int lo, int hi) {
  if (lo >= hi) return {Blocks{}};
  std::vector<Blocks> out;
  // The block containing lo is {lo = b_0 < b_1 < ... < b_k}; the gaps between
  // consecutive members and the tail after b_k are partitioned independently.
  std::vector<int> block{lo};
  std::function<void(int)> extend = [&](int from) {
    // Option 1: close the block here; the tail [from, hi) is free.
    {
      std::vector<std::vector<Blocks>> parts;
      for (std::size_t g = 0; g + 1 < block.size(); ++g)
        parts.push_back(nc_partitions_of(block[g] + 1, block[g + 1]));
      parts.push_back(nc_partitions_of(from, hi));
      std::vector<std::size_t> idx(parts.size(), 0);
      for (;;) {
        Blocks b{block};
        for (std::size_t g = 0; g < parts.size(); ++g)
          for (const auto& blk : parts[g][idx[g]]) b.push_back(blk);
        std::sort(b.begin(), b.end());
        out.push_back(std::move(b));
        std::size_t g = 0;
        while (g < idx.size() && ++idx[g] == parts[g].size()) idx[g++] = 0;
        if (g == idx.size()) break;
      }
    }
    // Option 2: add another member v >= from to the block.
    for (int v = from; v < hi; ++v) {
      block.push_back(v);
      extend(v + 1);
      block.pop_back();
    }
  };
  extend(lo + 1);
  return out;
}

}  // namespace detail

/// Non-crossing pairings of {0..n-1} as lists of (a, b) with a < b.
inline std::vector<std::vector<std::pair<int, int>>> nc_pairings(int n) {
  if (n < 0 || n > kMaxPairingN)
    throw SizeError("nc_pairings: n = " + std::to_string(n) + " exceeds " +
                    std::to_string(kMaxPairingN));
  std::vector<detail::Pairs> out;
  if (n % 2 != 0) return out;
  detail::Pairs cur;
  detail::nc_pairings_rec(0, n, cur, out, [&](detail::Pairs& c) { out.push_back(c); });
  for (auto& pr : out) std::sort(pr.begin(), pr.end());
  return out;
}

/// Memoised nc_pairings for repeated Wick evaluations.
inline const std::vector<std::vector<std::pair<int, int>>>& cached_nc_pairings(int n) {
  static std::mutex mutex;
  static std::map<int, std::vector<std::vector<std::pair<int, int>>>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, nc_pairings(n)).first;
  return it->second;
}

/// Complete, duplicate-free enumeration. Odd n with Pairing yields an empty list.
inline std::vector<NCStructure> enumerate_nc(NCKind kind, int n) {
  if (n < 1) throw DomainError("enumerate_nc: n must be positive");
  std::vector<NCStructure> out;
  if (kind == NCKind::Pairing) {
    for (auto& pairs : nc_pairings(n)) {
      NCStructure s;
      s.kind = kind;
      for (auto [a, b] : pairs) s.blocks.push_back({a, b});
      out.push_back(std::move(s));
    }
    return out;
  }
  if (n > kMaxPartitionN)
    throw SizeError("enumerate_nc: n = " + std::to_string(n) + " exceeds " +
                    std::to_string(kMaxPartitionN) + " for partitions");
  for (auto& blocks : detail::nc_partitions_of(0, n)) out.push_back({kind, std::move(blocks)});
  return out;
}

}  // namespace wignerlab::combinat
