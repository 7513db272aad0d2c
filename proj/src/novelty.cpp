#include "archloop/novelty.hpp"

namespace archloop {

namespace {

void apply_flags(NoveltyVerdict& v, const NoveltyPolicy& policy) {
  v.near_dup_text_train = v.j_train > policy.tau;
  v.near_dup_text_gen = v.j_gen > policy.tau;
  v.accepted = !policy.filter_enabled || (!v.near_dup_text_train && !v.near_dup_text_gen);
}

}  // namespace

CycleArchive::CycleArchive(LshParams params, int cycle_index)
    : index_(params), cycle_index_(cycle_index) {}

void CycleArchive::reset(int cycle_index) {
  index_.clear();
  cycle_index_ = cycle_index;
}

void CycleArchive::commit(std::string id, MinHashSignature sig) {
  index_.insert(std::move(id), std::move(sig));
}

NoveltyVerdict assess(const MinHashSignature& sig, const LshIndex& train_index,
                      const CycleArchive& archive, const NoveltyPolicy& policy) {
  NoveltyVerdict v;
  const Match train = train_index.max_jaccard(sig);
  const Match gen = archive.index().max_jaccard(sig);
  v.j_train = train.estimate;
  v.nearest_train_id = train.id;
  v.j_gen = gen.estimate;
  v.nearest_gen_id = gen.id;
  v.train_size_seen = train_index.size();
  v.archive_size_seen = archive.size();
  apply_flags(v, policy);
  return v;
}

NoveltyVerdict reverify(const NoveltyVerdict& verdict, const MinHashSignature& sig,
                        const LshIndex& train_index, const CycleArchive& archive,
                        const NoveltyPolicy& policy) {
  NoveltyVerdict v = verdict;
  if (v.train_size_seen != train_index.size()) {
    const Match train = train_index.max_jaccard(sig);
    v.j_train = train.estimate;
    v.nearest_train_id = train.id;
    v.train_size_seen = train_index.size();
  }
  if (v.archive_size_seen != archive.size()) {
    const Match gen = archive.index().max_jaccard(sig);
    v.j_gen = gen.estimate;
    v.nearest_gen_id = gen.id;
    v.archive_size_seen = archive.size();
  }
  apply_flags(v, policy);
  return v;
}

void commit(CycleArchive& archive, std::string id, MinHashSignature sig) {
  archive.commit(std::move(id), std::move(sig));
}

}  // namespace archloop
