#include "archloop/corpus.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "archloop/error.hpp"

namespace archloop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kCorpusFormat = 1;
constexpr const char* kMetaFile = "meta.json";
constexpr const char* kRecordsFile = "records.jsonl";
constexpr const char* kSnapshotFile = "index.snap";
constexpr const char* kDropsFile = "drops.jsonl";

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

json meta_to_json(const CorpusConfig& c) {
  return json{{"format", kCorpusFormat},
              {"k", c.k},
              {"num_perm", c.num_perm},
              {"seed", c.seed},
              {"tau", c.tau},
              {"retrieval_threshold", c.retrieval_threshold},
              {"generated_pairs", c.chat.generated_pairs},
              {"snapshot_every", c.snapshot_every}};
}

CorpusConfig meta_from_json(const json& j) {
  if (j.value("format", 0) != kCorpusFormat) throw CorpusIoError("unsupported corpus format");
  CorpusConfig c;
  c.k = j.at("k").get<int>();
  c.num_perm = j.at("num_perm").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.tau = j.at("tau").get<double>();
  c.retrieval_threshold = j.at("retrieval_threshold").get<double>();
  c.chat.generated_pairs = j.at("generated_pairs").get<int>();
  c.snapshot_every = j.at("snapshot_every").get<std::size_t>();
  return c;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusIoError("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw CorpusIoError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw CorpusIoError("write to " + path.string() + " failed: " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

int open_append(const fs::path& path) {
  int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) throw CorpusIoError("cannot open " + path.string() + ": " + std::strerror(errno));
  return fd;
}

}  // namespace

std::string_view to_string(Origin o) { return o == Origin::Seed ? "seed" : "generated"; }

std::string to_json_line(const CorpusRecord& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    pairs.push_back(json{{"variant", to_string(p.variant)},
                         {"system_message", p.system_message},
                         {"user_message", p.user_message},
                         {"assistant_code", p.assistant_code}});
  }
  json j{{"id", r.id},
         {"source_code", r.source_code},
         {"origin", to_string(r.origin)},
         {"cycle_added", r.cycle_added},
         {"accuracy", optional_to_json(r.accuracy)},
         {"j_train_at_accept", optional_to_json(r.j_train_at_accept)},
         {"j_gen_at_accept", optional_to_json(r.j_gen_at_accept)},
         {"signature", r.signature.values},
         {"signature_seed", r.signature.seed},
         {"pairs", std::move(pairs)}};
  return j.dump();
}

CorpusRecord record_from_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw CorpusIoError(std::string("malformed corpus line: ") + e.what());
  }
  try {
    CorpusRecord r;
    r.id = j.at("id").get<std::string>();
    r.source_code = j.at("source_code").get<std::string>();
    const auto origin = j.at("origin").get<std::string>();
    if (origin != "seed" && origin != "generated") throw CorpusIoError("unknown origin " + origin);
    r.origin = origin == "seed" ? Origin::Seed : Origin::Generated;
    r.cycle_added = j.at("cycle_added").get<int>();
    r.accuracy = optional_from_json(j, "accuracy");
    r.j_train_at_accept = optional_from_json(j, "j_train_at_accept");
    r.j_gen_at_accept = optional_from_json(j, "j_gen_at_accept");
    r.signature.values = j.at("signature").get<std::vector<std::uint64_t>>();
    r.signature.seed = j.at("signature_seed").get<std::uint64_t>();
    for (const auto& p : j.at("pairs")) {
      r.pairs.push_back(ChatPair{p.at("system_message").get<std::string>(),
                                 p.at("user_message").get<std::string>(),
                                 p.at("assistant_code").get<std::string>(),
                                 chat_variant_from_string(p.at("variant").get<std::string>())});
    }
    return r;
  } catch (const json::exception& e) {
    throw CorpusIoError(std::string("invalid corpus record: ") + e.what());
  }
}

LshParams CorpusConfig::lsh_params() const {
  return LshParams::for_threshold(num_perm, retrieval_threshold, seed);
}

CorpusStore::CorpusStore(CorpusStore&& other) noexcept
    : dir_(std::move(other.dir_)),
      config_(other.config_),
      hasher_(std::move(other.hasher_)),
      records_(std::move(other.records_)),
      index_(std::move(other.index_)),
      pair_count_(other.pair_count_),
      since_snapshot_(other.since_snapshot_),
      fd_(std::exchange(other.fd_, -1)) {}

CorpusStore& CorpusStore::operator=(CorpusStore&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    dir_ = std::move(other.dir_);
    config_ = other.config_;
    hasher_ = std::move(other.hasher_);
    records_ = std::move(other.records_);
    index_ = std::move(other.index_);
    pair_count_ = other.pair_count_;
    since_snapshot_ = other.since_snapshot_;
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

CorpusStore::~CorpusStore() {
  if (fd_ >= 0) ::close(fd_);
}

CorpusStore CorpusStore::create(const fs::path& dir, const CorpusConfig& config) {
  if (fs::exists(dir / kMetaFile)) throw CorpusIoError("corpus already exists in " + dir.string());
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CorpusIoError("cannot create " + dir.string() + ": " + ec.message());

  CorpusStore store;
  store.dir_ = dir;
  store.config_ = config;
  store.hasher_ = MinHasher(config.num_perm, config.seed);
  store.index_ = LshIndex(config.lsh_params());
  write_file_atomic(dir / kMetaFile, meta_to_json(config).dump(2) + "\n");
  store.fd_ = open_append(dir / kRecordsFile);
  return store;
}

CorpusStore CorpusStore::open(const fs::path& dir) {
  std::ifstream meta_in(dir / kMetaFile);
  if (!meta_in) throw CorpusIoError("no corpus in " + dir.string());
  CorpusStore store;
  store.dir_ = dir;
  try {
    store.config_ = meta_from_json(json::parse(meta_in));
  } catch (const json::exception& e) {
    throw CorpusIoError(std::string("bad corpus meta.json: ") + e.what());
  }
  store.hasher_ = MinHasher(store.config_.num_perm, store.config_.seed);
  store.index_ = LshIndex(store.config_.lsh_params());

  const fs::path records_path = dir / kRecordsFile;
  std::string content;
  {
    std::ifstream in(records_path, std::ios::binary);
    if (in) content.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  std::size_t pos = 0;
  std::size_t good_end = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    if (nl == std::string::npos) break;  // torn tail: no newline was written
    std::string_view line(content.data() + pos, nl - pos);
    if (!line.empty()) {
      CorpusRecord r = record_from_json_line(line);
      store.pair_count_ += r.pairs.size();
      store.records_.push_back(std::move(r));
    }
    pos = nl + 1;
    good_end = pos;
  }
  if (good_end != content.size()) fs::resize_file(records_path, good_end);

  // Snapshot first, then the records appended after it.
  std::size_t covered = 0;
  const fs::path snap = dir / kSnapshotFile;
  if (fs::exists(snap)) {
    try {
      LshIndex loaded = LshIndex::load(snap);
      bool prefix = loaded.params() == store.index_.params() && loaded.size() <= store.records_.size();
      for (std::size_t i = 0; prefix && i < loaded.size(); ++i) {
        prefix = loaded.ids()[i] == store.records_[i].id &&
                 loaded.signature(loaded.ids()[i]) == store.records_[i].signature;
      }
      if (prefix) {
        store.index_ = std::move(loaded);
        covered = store.index_.size();
      }
    } catch (const SnapshotError&) {
      covered = 0;
    }
  }
  for (std::size_t i = covered; i < store.records_.size(); ++i) {
    const auto& r = store.records_[i];
    if (store.signature_of(r.source_code) != r.signature) {
      throw SignatureMismatch("stored signature of " + r.id + " does not match its source");
    }
    store.index_.insert(r.id, r.signature);
  }
  store.fd_ = open_append(records_path);
  return store;
}

ShingleSet CorpusStore::shingles_of(std::string_view source) const {
  return shingle_source(source, config_.k);
}

MinHashSignature CorpusStore::signature_of(std::string_view source) const {
  return hasher_.sign(shingles_of(source));
}

void CorpusStore::append_line(const std::string& line) {
  write_all(fd_, line + "\n", dir_ / kRecordsFile);
  if (::fdatasync(fd_) != 0) {
    throw CorpusIoError("fdatasync on " + (dir_ / kRecordsFile).string() + " failed");
  }
}

std::size_t CorpusStore::append_accepted(CorpusRecord record) {
  if (index_.contains(record.id)) throw DuplicateId("corpus already holds record " + record.id);
  const MinHashSignature expected = signature_of(record.source_code);
  if (record.signature.values.empty()) {
    record.signature = expected;
  } else if (record.signature != expected) {
    throw SignatureMismatch("signature of " + record.id + " does not match its source");
  }
  if (record.pairs.empty()) record.pairs = to_chat_pairs(record, config_.chat);

  append_line(to_json_line(record));
  index_.insert(record.id, record.signature);
  pair_count_ += record.pairs.size();
  records_.push_back(std::move(record));

  if (config_.snapshot_every > 0 && ++since_snapshot_ >= config_.snapshot_every) snapshot();
  return pair_count_;
}

void CorpusStore::snapshot() {
  index_.save(dir_ / kSnapshotFile);
  since_snapshot_ = 0;
}

void CorpusStore::log_drop(std::string_view id, std::string_view reason, std::string_view detail) {
  json j{{"id", id}, {"reason", reason}};
  if (!detail.empty()) j["detail"] = detail;
  const fs::path path = dir_ / kDropsFile;
  std::ofstream out(path, std::ios::app);
  if (!out) throw CorpusIoError("cannot append to " + path.string());
  out << j.dump() << '\n';
}

IngestReport ingest_seed(std::istream& input, CorpusStore& store) {
  IngestReport report;
  LshIndex seen(store.config().lsh_params());
  const double tau = store.config().tau;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(input, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++report.total;
    const std::string where = "line-" + std::to_string(line_no);

    std::string code;
    try {
      json j = json::parse(line);
      code = j.at("code").get<std::string>();
    } catch (const json::exception&) {
      ++report.malformed;
      ++report.drops_by_reason["malformed_record"];
      store.log_drop(where, "malformed_record");
      continue;
    }

    MinHashSignature sig;
    try {
      sig = store.signature_of(code);
    } catch (const OversizeInput& e) {
      ++report.malformed;
      ++report.drops_by_reason["oversize"];
      store.log_drop(where, "oversize", e.what());
      continue;
    }

    const double nearest = std::max(seen.max_jaccard(sig).estimate,
                                    store.train_index().max_jaccard(sig).estimate);
    if (nearest > tau) continue;
    ++report.unique_after_dedup;
    seen.insert(where, sig);

    char id[32];
    std::snprintf(id, sizeof id, "seed-%06zu", store.record_count() + 1);
    CorpusRecord record;
    record.id = id;
    record.source_code = std::move(code);
    record.origin = Origin::Seed;
    record.cycle_added = 0;
    record.signature = std::move(sig);
    try {
      record.pairs = to_chat_pairs(record, store.config().chat);
    } catch (const ConversionError& e) {
      ++report.dropped;
      ++report.drops_by_reason["no_class_definition"];
      store.log_drop(where, "no_class_definition", e.what());
      continue;
    }
    report.pairs += record.pairs.size();
    ++report.converted;
    store.append_accepted(std::move(record));
  }
  store.snapshot();
  return report;
}

IngestReport ingest_seed(const fs::path& input, CorpusStore& store) {
  std::ifstream in(input);
  if (!in) throw CorpusIoError("cannot read seed input " + input.string());
  return ingest_seed(in, store);
}

void write_finetune_manifest(const CorpusStore& store, int next_cycle, const fs::path& path,
                             const FinetuneHyperparameters& hp) {
  json pairs = json::array();
  for (const auto& r : store.records()) {
    for (const auto& p : r.pairs) pairs.push_back(json{{"record_id", r.id}, {"variant", to_string(p.variant)}});
  }
  json manifest{
      {"for_cycle", next_cycle},
      {"record_count", store.record_count()},
      {"pair_count", store.pair_count()},
      {"hyperparameters",
       {{"base_model", hp.base_model},
        {"lora_rank", hp.lora_rank},
        {"lora_alpha", hp.lora_alpha},
        {"lora_dropout", hp.lora_dropout},
        {"target_modules", hp.target_modules},
        {"epochs", hp.epochs},
        {"learning_rate", hp.learning_rate},
        {"per_device_batch_size", hp.per_device_batch_size},
        {"gradient_accumulation_steps", hp.gradient_accumulation_steps},
        {"effective_batch_size", hp.effective_batch_size},
        {"optimizer", hp.optimizer},
        {"lr_schedule", hp.lr_schedule},
        {"warmup_steps", hp.warmup_steps},
        {"weight_decay", hp.weight_decay},
        {"max_grad_norm", hp.max_grad_norm},
        {"precision", hp.precision}}},
      {"pairs", std::move(pairs)}};
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  write_file_atomic(path, manifest.dump(2) + "\n");
}

}  // namespace archloop
