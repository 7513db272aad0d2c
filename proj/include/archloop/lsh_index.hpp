#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "archloop/minhash.hpp"

namespace archloop {

inline constexpr double kDefaultRetrievalThreshold = 0.85;

struct LshParams {
  int num_perm = kDefaultNumPerm;
  int bands = 16;
  int rows = 16;
  std::uint64_t seed = 0;
  double retrieval_threshold = kDefaultRetrievalThreshold;

  /// Picks the band/row split with bands * rows == num_perm whose collision
  /// threshold (1/b)^(1/r) is closest to `threshold`.
  static LshParams for_threshold(int num_perm, double threshold, std::uint64_t seed);

  // Approximate similarity at which a pair collides in some band with
  // probability ~ 1/2.
  double operating_point() const;

  friend bool operator==(const LshParams&, const LshParams&) = default;
};

struct Match {
  std::optional<std::string> id;
  double estimate = 0.0;
};

// Banded MinHash index. Append-only: entries are never removed, only the
// whole index can be rebuilt. Queries are const and safe to run
// concurrently; inserts need exclusive access.
class LshIndex {
 public:
  explicit LshIndex(LshParams params = {});

  const LshParams& params() const { return params_; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  bool contains(std::string_view id) const;

  /// Throws DuplicateId if `id` is present, IncompatibleSignature when the
  /// signature does not match the index's num_perm / seed.
  void insert(std::string id, MinHashSignature sig);

  /// Ids sharing at least one band bucket with `sig`, in insertion order.
  std::vector<std::string> candidates(const MinHashSignature& sig) const;

  /// Maximum MinHash estimate over the LSH candidates of `sig`. Ties resolve
  /// to the earliest inserted id. Empty index or no candidates -> (none, 0).
  Match max_jaccard(const MinHashSignature& sig) const;

  const MinHashSignature& signature(std::string_view id) const;
  const std::vector<std::string>& ids() const { return ids_; }

  void clear();

  /// Binary snapshot: "ALSH" magic, version, params, then every entry in
  /// insertion order; integers little-endian.
  void save(const std::filesystem::path& path) const;
  static LshIndex load(const std::filesystem::path& path);

 private:
  void check_compatible(const MinHashSignature& sig) const;
  std::uint64_t band_key(const MinHashSignature& sig, int band) const;
  std::vector<std::uint32_t> candidate_slots(const MinHashSignature& sig) const;

  LshParams params_;
  std::vector<std::string> ids_;
  std::vector<MinHashSignature> sigs_;
  std::unordered_map<std::string, std::uint32_t> slot_of_;
  std::vector<std::unordered_map<std::uint64_t, std::vector<std::uint32_t>>> buckets_;
};

}  // namespace archloop
