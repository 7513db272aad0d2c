#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "archloop/lsh_index.hpp"

namespace archloop {

inline constexpr double kDefaultTau = 0.90;

// Which assessed candidates become references for later ones in the cycle.
enum class ArchiveMembership {
  AllAssessed,   // every candidate that reached novelty assessment
  AcceptedOnly,  // only candidates whose final disposition is accepted
};

struct NoveltyPolicy {
  double tau = kDefaultTau;
  bool filter_enabled = true;
};

struct NoveltyVerdict {
  double j_train = 0.0;
  double j_gen = 0.0;
  bool near_dup_text_train = false;
  bool near_dup_text_gen = false;
  bool accepted = true;
  int rejection_count = 0;
  std::optional<std::string> nearest_train_id;
  std::optional<std::string> nearest_gen_id;

  // Reference-set sizes the similarities were computed against. Both indexes
  // are append-only, so an unchanged size means the verdict is still current.
  std::size_t train_size_seen = 0;
  std::size_t archive_size_seen = 0;
};

// Signatures of the candidates assessed earlier in the current cycle.
class CycleArchive {
 public:
  explicit CycleArchive(LshParams params = {}, int cycle_index = 0);

  int cycle_index() const { return cycle_index_; }
  const LshIndex& index() const { return index_; }
  std::size_t size() const { return index_.size(); }

  /// Clears every reference; called at each cycle boundary.
  void reset(int cycle_index);

  /// Throws DuplicateId when the id was already committed this cycle.
  void commit(std::string id, MinHashSignature sig);

 private:
  LshIndex index_;
  int cycle_index_;
};

/// Computes j_train and j_gen as max MinHash similarity against the training
/// index and the cycle archive. A similarity strictly above tau flags a near
/// duplicate; exactly tau is accepted. With the filter disabled the flags are
/// still reported but `accepted` is forced true. rejection_count is left at 0
/// for the caller to fill.
NoveltyVerdict assess(const MinHashSignature& sig, const LshIndex& train_index,
                      const CycleArchive& archive, const NoveltyPolicy& policy);

/// Re-computes whichever similarity is stale because a reference was added
/// after `verdict` was produced. Used for check-then-commit when verdicts are
/// computed ahead of the serialized commit step.
NoveltyVerdict reverify(const NoveltyVerdict& verdict, const MinHashSignature& sig,
                        const LshIndex& train_index, const CycleArchive& archive,
                        const NoveltyPolicy& policy);

void commit(CycleArchive& archive, std::string id, MinHashSignature sig);

// Counts novelty rejections between acceptances.
class RejectionCounter {
 public:
  int current() const { return count_; }
  void on_rejection() { ++count_; }
  // Returns the number of rejections since the previous acceptance.
  int on_acceptance() {
    int n = count_;
    count_ = 0;
    return n;
  }
  void reset() { count_ = 0; }

 private:
  int count_ = 0;
};

}  // namespace archloop
