#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "archloop/shingle.hpp"

namespace archloop {

inline constexpr int kDefaultNumPerm = 256;
inline constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;
inline constexpr std::uint64_t kEmptySlot = std::numeric_limits<std::uint64_t>::max();

struct MinHashSignature {
  std::vector<std::uint64_t> values;
  std::uint64_t seed = 0;

  int num_perm() const { return static_cast<int>(values.size()); }

  // Every slot is kEmptySlot. Real minima are < 2^61, so only the empty set
  // produces this.
  bool is_empty_set() const;

  friend bool operator==(const MinHashSignature&, const MinHashSignature&) = default;
};

// Seeded family h_i(x) = (a_i * mix(x) + b_i) mod (2^61 - 1), i < num_perm.
class MinHasher {
 public:
  MinHasher(int num_perm = kDefaultNumPerm, std::uint64_t seed = 0);

  MinHashSignature sign(const ShingleSet& shingles) const;

  int num_perm() const { return static_cast<int>(a_.size()); }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<std::uint64_t> a_;
  std::vector<std::uint64_t> b_;
  std::uint64_t seed_;
};

/// One-shot form of MinHasher::sign. Throws std::invalid_argument for
/// num_perm < 16.
MinHashSignature make_signature(const ShingleSet& shingles, int num_perm, std::uint64_t seed);

/// Fraction of coordinate-wise equal minima. Empty vs non-empty is 0, empty vs
/// empty is 1. Throws IncompatibleSignature when lengths or seeds differ.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

}  // namespace archloop
