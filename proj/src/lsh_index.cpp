#include "archloop/lsh_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "archloop/error.hpp"
#include "archloop/hash.hpp"

namespace archloop {

namespace {

constexpr char kMagic[4] = {'A', 'L', 'S', 'H'};
constexpr std::uint32_t kSnapshotVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_le(std::istream& in, int bytes) {
  unsigned char b[8] = {};
  if (!in.read(reinterpret_cast<char*>(b), bytes)) throw SnapshotError("truncated index snapshot");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

LshParams LshParams::for_threshold(int num_perm, double threshold, std::uint64_t seed) {
  LshParams best;
  best.num_perm = num_perm;
  best.seed = seed;
  best.retrieval_threshold = threshold;
  double best_gap = 2.0;
  for (int b = 1; b <= num_perm; ++b) {
    if (num_perm % b != 0) continue;
    const int r = num_perm / b;
    const double gap = std::abs(std::pow(1.0 / b, 1.0 / r) - threshold);
    if (gap < best_gap) {
      best_gap = gap;
      best.bands = b;
      best.rows = r;
    }
  }
  return best;
}

double LshParams::operating_point() const { return std::pow(1.0 / bands, 1.0 / rows); }

LshIndex::LshIndex(LshParams params) : params_(params) {
  if (params_.bands < 1 || params_.rows < 1 || params_.bands * params_.rows != params_.num_perm) {
    throw std::invalid_argument("LSH bands * rows must equal num_perm");
  }
  buckets_.resize(params_.bands);
}

bool LshIndex::contains(std::string_view id) const {
  return slot_of_.find(std::string(id)) != slot_of_.end();
}

void LshIndex::check_compatible(const MinHashSignature& sig) const {
  if (sig.num_perm() != params_.num_perm || sig.seed != params_.seed) {
    throw IncompatibleSignature("signature (num_perm " + std::to_string(sig.num_perm()) +
                                ") does not match index (num_perm " +
                                std::to_string(params_.num_perm) + ")");
  }
}

std::uint64_t LshIndex::band_key(const MinHashSignature& sig, int band) const {
  std::uint64_t h = hash_combine(kFnvOffset, static_cast<std::uint64_t>(band));
  const auto begin = static_cast<std::size_t>(band) * params_.rows;
  for (std::size_t i = begin; i < begin + params_.rows; ++i) h = hash_combine(h, sig.values[i]);
  return h;
}

void LshIndex::insert(std::string id, MinHashSignature sig) {
  check_compatible(sig);
  if (contains(id)) throw DuplicateId("id already indexed: " + id);
  const auto slot = static_cast<std::uint32_t>(ids_.size());
  for (int b = 0; b < params_.bands; ++b) buckets_[b][band_key(sig, b)].push_back(slot);
  slot_of_.emplace(id, slot);
  ids_.push_back(std::move(id));
  sigs_.push_back(std::move(sig));
}

std::vector<std::uint32_t> LshIndex::candidate_slots(const MinHashSignature& sig) const {
  check_compatible(sig);
  std::vector<std::uint32_t> slots;
  for (int b = 0; b < params_.bands; ++b) {
    auto it = buckets_[b].find(band_key(sig, b));
    if (it != buckets_[b].end()) slots.insert(slots.end(), it->second.begin(), it->second.end());
  }
  std::sort(slots.begin(), slots.end());
  slots.erase(std::unique(slots.begin(), slots.end()), slots.end());
  return slots;
}

std::vector<std::string> LshIndex::candidates(const MinHashSignature& sig) const {
  std::vector<std::string> out;
  for (auto slot : candidate_slots(sig)) out.push_back(ids_[slot]);
  return out;
}

Match LshIndex::max_jaccard(const MinHashSignature& sig) const {
  Match best;
  for (auto slot : candidate_slots(sig)) {
    const double j = estimate_jaccard(sig, sigs_[slot]);
    if (!best.id || j > best.estimate) {
      best.id = ids_[slot];
      best.estimate = j;
    }
  }
  return best;
}

const MinHashSignature& LshIndex::signature(std::string_view id) const {
  auto it = slot_of_.find(std::string(id));
  if (it == slot_of_.end()) throw std::out_of_range("id not indexed: " + std::string(id));
  return sigs_[it->second];
}

void LshIndex::clear() {
  ids_.clear();
  sigs_.clear();
  slot_of_.clear();
  for (auto& b : buckets_) b.clear();
}

void LshIndex::save(const std::filesystem::path& path) const {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw SnapshotError("cannot write index snapshot " + tmp.string());
    out.write(kMagic, 4);
    put_u32(out, kSnapshotVersion);
    put_u32(out, static_cast<std::uint32_t>(params_.num_perm));
    put_u32(out, static_cast<std::uint32_t>(params_.bands));
    put_u64(out, params_.seed);
    put_u64(out, std::bit_cast<std::uint64_t>(params_.retrieval_threshold));
    put_u64(out, ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      put_u32(out, static_cast<std::uint32_t>(ids_[i].size()));
      out.write(ids_[i].data(), static_cast<std::streamsize>(ids_[i].size()));
      for (auto v : sigs_[i].values) put_u64(out, v);
    }
    out.flush();
    if (!out) throw SnapshotError("failed writing index snapshot " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LshIndex LshIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SnapshotError("cannot open index snapshot " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw SnapshotError("not an index snapshot: " + path.string());
  }
  const auto version = static_cast<std::uint32_t>(get_le(in, 4));
  if (version != kSnapshotVersion) {
    throw SnapshotError("unsupported index snapshot version " + std::to_string(version));
  }
  LshParams params;
  params.num_perm = static_cast<int>(get_le(in, 4));
  params.bands = static_cast<int>(get_le(in, 4));
  params.rows = params.bands > 0 ? params.num_perm / params.bands : 0;
  params.seed = get_le(in, 8);
  params.retrieval_threshold = std::bit_cast<double>(get_le(in, 8));
  LshIndex index(params);
  const std::uint64_t count = get_le(in, 8);
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto len = static_cast<std::size_t>(get_le(in, 4));
    std::string id(len, '\0');
    if (!in.read(id.data(), static_cast<std::streamsize>(len))) {
      throw SnapshotError("truncated index snapshot");
    }
    MinHashSignature sig;
    sig.seed = params.seed;
    sig.values.reserve(params.num_perm);
    for (int i = 0; i < params.num_perm; ++i) sig.values.push_back(get_le(in, 8));
    index.insert(std::move(id), std::move(sig));
  }
  return index;
}

}  // namespace archloop
