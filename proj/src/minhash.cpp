#include "archloop/minhash.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "archloop/error.hpp"
#include "archloop/hash.hpp"

namespace archloop {

namespace {

constexpr std::uint64_t reduce61(std::uint64_t x) {
  std::uint64_t r = (x & kMersenne61) + (x >> 61);
  return r >= kMersenne61 ? r - kMersenne61 : r;
}

constexpr std::uint64_t mul_add_mod61(std::uint64_t a, std::uint64_t x, std::uint64_t b) {
  uint128 p = static_cast<uint128>(a) * x + b;
  std::uint64_t lo = static_cast<std::uint64_t>(p & kMersenne61);
  std::uint64_t hi = static_cast<std::uint64_t>(p >> 61);
  return reduce61(lo + hi);
}

}  // namespace

bool MinHashSignature::is_empty_set() const {
  return std::all_of(values.begin(), values.end(), [](std::uint64_t v) { return v == kEmptySlot; });
}

MinHasher::MinHasher(int num_perm, std::uint64_t seed) : seed_(seed) {
  if (num_perm < 16) throw std::invalid_argument("num_perm must be >= 16");
  a_.reserve(num_perm);
  b_.reserve(num_perm);
  SplitMix64 rng(seed);
  for (int i = 0; i < num_perm; ++i) {
    std::uint64_t a = 0;
    while (a == 0) a = reduce61(rng.next());
    a_.push_back(a);
    b_.push_back(reduce61(rng.next()));
  }
}

MinHashSignature MinHasher::sign(const ShingleSet& shingles) const {
  MinHashSignature sig;
  sig.seed = seed_;
  sig.values.assign(a_.size(), kEmptySlot);
  for (std::uint64_t s : shingles.shingles) {
    const std::uint64_t x = reduce61(mix64(s));
    for (std::size_t i = 0; i < a_.size(); ++i) {
      sig.values[i] = std::min(sig.values[i], mul_add_mod61(a_[i], x, b_[i]));
    }
  }
  return sig;
}

MinHashSignature make_signature(const ShingleSet& shingles, int num_perm, std::uint64_t seed) {
  return MinHasher(num_perm, seed).sign(shingles);
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.values.size() != b.values.size()) {
    throw IncompatibleSignature("signature lengths differ: " + std::to_string(a.values.size()) +
                                " vs " + std::to_string(b.values.size()));
  }
  if (a.seed != b.seed) throw IncompatibleSignature("signatures come from different hash seeds");
  if (a.values.empty()) return 1.0;

  const bool a_empty = a.is_empty_set();
  const bool b_empty = b.is_empty_set();
  if (a_empty || b_empty) return (a_empty && b_empty) ? 1.0 : 0.0;

  std::size_t equal = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) equal += a.values[i] == b.values[i];
  return static_cast<double>(equal) / static_cast<double>(a.values.size());
}

}  // namespace archloop
