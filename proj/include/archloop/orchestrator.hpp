#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "archloop/candidate.hpp"
#include "archloop/corpus.hpp"
#include "archloop/gateway.hpp"
#include "archloop/novelty.hpp"
#include "archloop/stats.hpp"

namespace archloop {

struct Ablations {
  bool novelty_filter_enabled = true;
  bool accuracy_threshold_enabled = true;
  bool iteration_enabled = true;

  friend bool operator==(const Ablations&, const Ablations&) = default;
};

struct RunConfig {
  int cycles = 22;
  int samples_per_cycle = 50;
  // Per-cycle sample counts; overrides samples_per_cycle when non-empty and
  // must then have exactly `cycles` entries.
  std::vector<int> samples_schedule;
  double accuracy_threshold = 0.40;
  double tau = kDefaultTau;
  int k = kDefaultShingleWidth;
  int num_perm = kDefaultNumPerm;
  std::uint64_t seed = 0;
  Ablations ablations;
  int workers = 1;
  ArchiveMembership archive_membership = ArchiveMembership::AllAssessed;
  // Extra attempts per candidate when the evaluator is unavailable.
  int retry_budget = 2;
  double lr = 0.01;
  double momentum = 0.9;
  double confidence = 0.95;

  /// Throws ConfigError.
  void validate() const;
  int samples_for(int cycle) const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::ordered_json to_json(const RunConfig& config);

/// One candidate log line. Novelty fields appear only for candidates that
/// reached assessment; similarities are rounded to four decimals.
nlohmann::ordered_json to_log_json(const CandidateRecord& record);
std::string to_log_line(const CandidateRecord& record);

struct CycleOutcome {
  CycleStats stats;
  std::vector<CandidateRecord> records;
  // Set when the evaluator gave out; `records` then holds the id-ordered
  // prefix that was fully processed.
  std::optional<std::string> abort_reason;
};

struct RunReport {
  RunConfig config;
  std::string generator_id;
  std::string evaluator_id;
  std::size_t initial_pairs = 0;
  std::size_t initial_records = 0;
  std::vector<CycleStats> cycles;
  PooledStats pooled;
  std::optional<std::string> abort_reason;

  bool aborted() const { return abort_reason.has_value(); }
};

nlohmann::ordered_json to_json(const RunReport& report);

// Drives the generate-evaluate-select-fine-tune loop over a corpus it owns for
// the duration of the run. Accepted candidates are appended to the corpus
// (and become training references immediately) when iteration is enabled.
//
// Run directory layout:
//   candidates.jsonl          one CandidateRecord per line, all cycles
//   finetune/cycle_NN.json    manifest for the round after cycle NN
//   run_report.json, report.csv, report.md, plot_data.csv, manifest.json
class Orchestrator {
 public:
  /// Throws ConfigError for an invalid config or one whose k / num_perm
  /// disagree with the corpus.
  Orchestrator(RunConfig config, CorpusStore& corpus, Generator& generator,
               EvaluatorFactory evaluators, std::filesystem::path run_dir);

  /// Runs one cycle; cycles must be called in increasing order.
  CycleOutcome run_cycle(int cycle);

  /// Runs config.cycles cycles (stopping at the first abort) and writes the
  /// reports. Returns the report, partial when aborted.
  RunReport run();

  int generator_state() const { return generator_state_; }
  const RunConfig& config() const { return config_; }

 private:
  struct Evaluated;

  std::vector<Evaluated> evaluate(int cycle, const std::vector<GeneratedCandidate>& generated,
                                  std::optional<std::string>& abort_reason);
  void write_reports(const RunReport& report) const;

  RunConfig config_;
  CorpusStore& corpus_;
  Generator& generator_;
  EvaluatorFactory evaluators_;
  // One evaluator per worker, kept across cycles.
  std::vector<std::unique_ptr<Evaluator>> pool_;
  std::filesystem::path run_dir_;
  std::string evaluator_id_;
  int generator_state_ = 0;
  int last_cycle_ = 0;
  CycleArchive archive_;
  RejectionCounter rejections_;
  // Accuracy-bearing copies (source dropped) for pooled statistics.
  std::vector<CandidateRecord> history_;
};

/// Copies a corpus directory (used so a run never mutates its input corpus).
void copy_corpus(const std::filesystem::path& from, const std::filesystem::path& to);

}  // namespace archloop
