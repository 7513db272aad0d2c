#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "archloop/chat.hpp"
#include "archloop/lsh_index.hpp"
#include "archloop/minhash.hpp"
#include "archloop/novelty.hpp"
#include "archloop/shingle.hpp"

namespace archloop {

enum class Origin { Seed, Generated };

std::string_view to_string(Origin o);

struct CorpusRecord {
  std::string id;
  std::string source_code;
  Origin origin = Origin::Seed;
  int cycle_added = 0;
  std::optional<double> accuracy;
  std::optional<double> j_train_at_accept;
  std::optional<double> j_gen_at_accept;
  MinHashSignature signature;
  std::vector<ChatPair> pairs;

  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

// One JSON object per line, keys in sorted order. Parsing then serializing a
// line reproduces it byte for byte.
std::string to_json_line(const CorpusRecord& record);
CorpusRecord record_from_json_line(std::string_view line);

struct CorpusConfig {
  int k = kDefaultShingleWidth;
  int num_perm = kDefaultNumPerm;
  std::uint64_t seed = 0;
  double tau = kDefaultTau;
  double retrieval_threshold = kDefaultRetrievalThreshold;
  ChatPolicy chat;
  // Index snapshot cadence, in appended records.
  std::size_t snapshot_every = 64;

  LshParams lsh_params() const;

  friend bool operator==(const CorpusConfig&, const CorpusConfig&) = default;
};

struct IngestReport {
  std::size_t total = 0;
  std::size_t malformed = 0;
  std::size_t unique_after_dedup = 0;
  std::size_t converted = 0;
  std::size_t dropped = 0;
  std::size_t pairs = 0;
  std::map<std::string, std::size_t> drops_by_reason;
};

// Training corpus on disk:
//   meta.json      configuration (hash seed, k, num_perm, tau, chat policy)
//   records.jsonl  append-only, one CorpusRecord per line
//   index.snap     periodic LshIndex snapshot over the record signatures
//   drops.jsonl    conversion / ingest drops with reason codes
// Single writer; readers work from their own copy.
class CorpusStore {
 public:
  /// Creates an empty corpus in `dir`. Throws CorpusIoError if `dir` already
  /// holds a corpus.
  static CorpusStore create(const std::filesystem::path& dir, const CorpusConfig& config);

  /// Loads records and rebuilds the training index (snapshot plus log tail).
  /// A torn final line left by a crash is ignored.
  static CorpusStore open(const std::filesystem::path& dir);

  CorpusStore(CorpusStore&&) noexcept;
  CorpusStore& operator=(CorpusStore&&) noexcept;
  ~CorpusStore();

  const std::filesystem::path& dir() const { return dir_; }
  const CorpusConfig& config() const { return config_; }
  const std::vector<CorpusRecord>& records() const { return records_; }
  const LshIndex& train_index() const { return index_; }

  std::size_t record_count() const { return records_.size(); }
  // Corpus size in prompt-code pairs.
  std::size_t pair_count() const { return pair_count_; }

  ShingleSet shingles_of(std::string_view source) const;
  MinHashSignature signature_of(std::string_view source) const;

  /// Adds an accepted record: fills chat pairs if absent, checks the id is new
  /// and the signature matches the source, appends durably, updates the
  /// index. Returns the new pair count. Throws DuplicateId /
  /// SignatureMismatch / ConversionError.
  std::size_t append_accepted(CorpusRecord record);

  /// Writes index.snap for the current state.
  void snapshot();

  /// Appends a {"id","reason"} line to drops.jsonl.
  void log_drop(std::string_view id, std::string_view reason, std::string_view detail = {});

 private:
  CorpusStore() = default;
  void append_line(const std::string& line);

  std::filesystem::path dir_;
  CorpusConfig config_;
  MinHasher hasher_;
  std::vector<CorpusRecord> records_;
  LshIndex index_;
  std::size_t pair_count_ = 0;
  std::size_t since_snapshot_ = 0;
  int fd_ = -1;
};

/// Reads line-delimited JSON snippets ({"code": "..."}; optional "id"),
/// drops near-duplicates (MinHash estimate > tau against everything kept so
/// far and the existing corpus), converts survivors to chat pairs and appends
/// them as seed records. Malformed lines and conversion failures are counted
/// and logged, never fatal.
IngestReport ingest_seed(std::istream& input, CorpusStore& store);

/// Throws CorpusIoError when the file cannot be read.
IngestReport ingest_seed(const std::filesystem::path& input, CorpusStore& store);

struct FinetuneHyperparameters {
  std::string base_model = "deepseek-coder-7b-instruct-v1.5";
  int lora_rank = 32;
  int lora_alpha = 32;
  double lora_dropout = 0.05;
  std::vector<std::string> target_modules = {"q_proj", "k_proj", "v_proj", "o_proj",
                                             "up_proj", "down_proj", "gate_proj"};
  int epochs = 5;
  double learning_rate = 1e-5;
  int per_device_batch_size = 1;
  int gradient_accumulation_steps = 4;
  int effective_batch_size = 4;
  std::string optimizer = "paged_adamw_8bit";
  std::string lr_schedule = "cosine";
  int warmup_steps = 20;
  double weight_decay = 0.01;
  double max_grad_norm = 1.0;
  std::string precision = "bfloat16";
};

/// Writes the fine-tune manifest for the next cycle: every (record id,
/// variant) pair in the corpus plus the adaptation hyperparameters, recorded
/// as metadata for an external trainer.
void write_finetune_manifest(const CorpusStore& store, int next_cycle,
                             const std::filesystem::path& path,
                             const FinetuneHyperparameters& hp = {});

}  // namespace archloop
