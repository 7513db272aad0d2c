#include "archloop/orchestrator.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "archloop/error.hpp"
#include "archloop/report.hpp"

#ifndef ARCHLOOP_VERSION
#define ARCHLOOP_VERSION "0.0.0"
#endif

namespace archloop {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Disposition d) {
  switch (d) {
    case Disposition::Invalid: return "invalid";
    case Disposition::BelowThreshold: return "below_threshold";
    case Disposition::NearDuplicate: return "near_duplicate";
    case Disposition::Accepted: return "accepted";
  }
  return "invalid";
}

Disposition disposition_from_string(std::string_view s) {
  if (s == "invalid") return Disposition::Invalid;
  if (s == "below_threshold") return Disposition::BelowThreshold;
  if (s == "near_duplicate") return Disposition::NearDuplicate;
  if (s == "accepted") return Disposition::Accepted;
  throw std::invalid_argument("unknown disposition '" + std::string(s) + "'");
}

namespace {

bool is_fraction(double x) { return x >= 0.0 && x <= 1.0; }

double round4(double x) { return std::round(x * 1e4) / 1e4; }

std::string cycle_tag(int cycle) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", cycle);
  return buf;
}

std::string candidate_id(int cycle, int slot) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%02d-%04d", cycle, slot);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw CorpusIoError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

ordered_json opt(const std::optional<double>& x) { return x ? ordered_json(*x) : ordered_json(); }

ordered_json opt(const std::optional<Interval>& ci) {
  return ci ? ordered_json::array({ci->lo, ci->hi}) : ordered_json();
}

ordered_json to_json(const CycleStats& s) {
  return ordered_json{
      {"cycle", s.cycle},
      {"complete", s.complete},
      {"threshold", s.threshold},
      {"n_gen", s.n_gen},
      {"n_valid", s.n_valid},
      {"valid_rate", s.valid_rate},
      {"valid_rate_ci", opt(std::optional<Interval>(s.valid_rate_ci))},
      {"best_acc", opt(s.best_acc)},
      {"mean_acc", opt(s.mean_acc)},
      {"mean_acc_ci", opt(s.mean_acc_ci)},
      {"median_acc", opt(s.median_acc)},
      {"std_acc", opt(s.std_acc)},
      {"n_above_threshold", s.n_above_threshold},
      {"frac_above_threshold", opt(s.frac_above_threshold)},
      {"frac_above_threshold_ci", opt(s.frac_above_threshold_ci)},
      {"n_near_duplicate", s.n_near_duplicate},
      {"n_unique_accepted", s.n_unique_accepted},
      {"corpus_size_after", s.corpus_size_after},
  };
}

ordered_json to_json(const PooledStats& p) {
  return ordered_json{
      {"n_gen", p.n_gen},
      {"n_valid", p.n_valid},
      {"n_accepted", p.n_accepted},
      {"valid_rate", p.valid_rate},
      {"valid_rate_ci", opt(p.valid_rate_ci)},
      {"mean_acc", opt(p.mean_acc)},
      {"mean_acc_ci", opt(p.mean_acc_ci)},
      {"frac_above_threshold", opt(p.frac_above_threshold)},
      {"frac_above_threshold_ci", opt(p.frac_above_threshold_ci)},
  };
}

}  // namespace

void RunConfig::validate() const {
  if (cycles < 1) throw ConfigError("cycles must be >= 1");
  if (samples_schedule.empty()) {
    if (samples_per_cycle < 1) throw ConfigError("samples per cycle must be >= 1");
  } else {
    if (samples_schedule.size() != static_cast<std::size_t>(cycles)) {
      throw ConfigError("samples schedule needs one entry per cycle");
    }
    for (int n : samples_schedule) {
      if (n < 1) throw ConfigError("samples schedule entries must be >= 1");
    }
  }
  if (!is_fraction(accuracy_threshold)) throw ConfigError("accuracy threshold must be in [0, 1]");
  if (!is_fraction(tau)) throw ConfigError("tau must be in [0, 1]");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must be in (0, 1)");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (num_perm < 16) throw ConfigError("num_perm must be >= 16");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (retry_budget < 0) throw ConfigError("retry budget must be >= 0");
  if (!std::isfinite(lr) || lr < 0.0) throw ConfigError("lr must be a non-negative number");
  if (!std::isfinite(momentum) || momentum < 0.0) throw ConfigError("momentum must be a non-negative number");
}

int RunConfig::samples_for(int cycle) const {
  if (samples_schedule.empty()) return samples_per_cycle;
  return samples_schedule.at(static_cast<std::size_t>(cycle - 1));
}

ordered_json to_json(const RunConfig& c) {
  return ordered_json{
      {"cycles", c.cycles},
      {"samples_per_cycle", c.samples_per_cycle},
      {"samples_schedule", c.samples_schedule},
      {"accuracy_threshold", c.accuracy_threshold},
      {"tau", c.tau},
      {"k", c.k},
      {"num_perm", c.num_perm},
      {"seed", c.seed},
      {"ablations",
       {{"novelty_filter_enabled", c.ablations.novelty_filter_enabled},
        {"accuracy_threshold_enabled", c.ablations.accuracy_threshold_enabled},
        {"iteration_enabled", c.ablations.iteration_enabled}}},
      {"workers", c.workers},
      {"archive_membership",
       c.archive_membership == ArchiveMembership::AllAssessed ? "all_assessed" : "accepted_only"},
      {"retry_budget", c.retry_budget},
      {"lr", c.lr},
      {"momentum", c.momentum},
      {"confidence", c.confidence},
  };
}

ordered_json to_log_json(const CandidateRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["cycle"] = r.cycle;
  j["disposition"] = std::string(to_string(r.disposition));
  const auto& v = r.validity;
  j["validity"] = ordered_json{
      {"parse_ok", v.parse_ok()},
      {"instantiate_ok", v.instantiate_ok()},
      {"forward_ok", v.forward_ok()},
      {"contract_ok", v.contract_ok()},
      {"failure_stage", v.failure_stage() ? ordered_json(std::string(to_string(*v.failure_stage())))
                                          : ordered_json()},
      {"message", v.message()},
  };
  if (r.eval) {
    j["accuracy"] = r.eval->accuracy;
    j["wall_time_s"] = r.eval->wall_time;
    j["evaluator_id"] = r.eval->evaluator_id;
  } else {
    j["accuracy"] = nullptr;
  }
  if (r.novelty) {
    const auto& n = *r.novelty;
    j["nn_jaccard_train"] = round4(n.j_train);
    j["near_dup_text_train"] = n.near_dup_text_train;
    j["nn_jaccard_gen"] = round4(n.j_gen);
    j["near_dup_text_gen"] = n.near_dup_text_gen;
    j["rejection_count"] = n.rejection_count;
    j["nearest_train_id"] = n.nearest_train_id ? ordered_json(*n.nearest_train_id) : ordered_json();
    j["nearest_gen_id"] = n.nearest_gen_id ? ordered_json(*n.nearest_gen_id) : ordered_json();
  }
  j["failure"] = r.failure ? ordered_json(*r.failure) : ordered_json();
  j["source_code"] = r.source_code;
  return j;
}

std::string to_log_line(const CandidateRecord& record) { return to_log_json(record).dump(); }

ordered_json to_json(const RunReport& r) {
  ordered_json cycles = ordered_json::array();
  for (const auto& s : r.cycles) cycles.push_back(to_json(s));
  return ordered_json{
      {"config", to_json(r.config)},
      {"generator_id", r.generator_id},
      {"evaluator_id", r.evaluator_id},
      {"initial_records", r.initial_records},
      {"initial_pairs", r.initial_pairs},
      {"aborted", r.aborted()},
      {"abort_reason", r.abort_reason ? ordered_json(*r.abort_reason) : ordered_json()},
      {"cycles", cycles},
      {"pooled", to_json(r.pooled)},
  };
}

struct Orchestrator::Evaluated {
  ValidityReport validity = ValidityReport::failed_at(Stage::Parse, "not evaluated");
  std::optional<EvalResult> eval;
  std::optional<std::string> failure;
  std::optional<MinHashSignature> signature;
  std::optional<NoveltyVerdict> verdict;
  bool done = false;
};

Orchestrator::Orchestrator(RunConfig config, CorpusStore& corpus, Generator& generator,
                           EvaluatorFactory evaluators, fs::path run_dir)
    : config_(std::move(config)),
      corpus_(corpus),
      generator_(generator),
      evaluators_(std::move(evaluators)),
      run_dir_(std::move(run_dir)),
      archive_(corpus.config().lsh_params(), 1) {
  config_.validate();
  if (config_.k != corpus_.config().k || config_.num_perm != corpus_.config().num_perm) {
    throw ConfigError("run k / num_perm (" + std::to_string(config_.k) + ", " +
                      std::to_string(config_.num_perm) + ") differ from the corpus (" +
                      std::to_string(corpus_.config().k) + ", " +
                      std::to_string(corpus_.config().num_perm) + ")");
  }
  if (!evaluators_) throw ConfigError("no evaluator factory");
  for (int w = 0; w < config_.workers; ++w) {
    auto ev = evaluators_();
    if (!ev) throw ConfigError("evaluator factory returned nothing");
    pool_.push_back(std::move(ev));
  }
  evaluator_id_ = pool_.front()->id();
  fs::create_directories(run_dir_);
}

std::vector<Orchestrator::Evaluated> Orchestrator::evaluate(
    int cycle, const std::vector<GeneratedCandidate>& generated,
    std::optional<std::string>& abort_reason) {
  const std::size_t n = generated.size();
  std::vector<Evaluated> out(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex abort_mu;
  std::size_t abort_at = n;

  const NoveltyPolicy policy{config_.tau, config_.ablations.novelty_filter_enabled};
  const EvalContext ctx{cycle, generator_state_, config_.lr, config_.momentum};

  auto fail_run = [&](std::size_t i, std::string reason) {
    std::lock_guard lock(abort_mu);
    if (i < abort_at) {
      abort_at = i;
      abort_reason = std::move(reason);
    }
    stop = true;
  };

  auto work = [&](Evaluator& ev) {
    for (;;) {
      if (stop) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const std::string id = candidate_id(cycle, static_cast<int>(i));
      Evaluated& e = out[i];
      const auto& g = generated[i];
      if (g.error) {
        e.failure = "generation_failed: " + *g.error;
        e.done = true;
        continue;
      }
      for (int attempt = 0;; ++attempt) {
        try {
          e.validity = ev.validate(id, g.source);
          e.eval.reset();
          e.failure.reset();
          if (e.validity.valid()) {
            try {
              e.eval = ev.train_one_epoch(id, g.source, ctx);
            } catch (const RuntimeFailure& rf) {
              e.failure = std::string("runtime_failure: ") + rf.what();
            }
          }
          e.done = true;
          break;
        } catch (const EvaluatorUnavailable& u) {
          if (attempt >= config_.retry_budget) {
            fail_run(i, "evaluator unavailable at " + id + " after " +
                            std::to_string(attempt + 1) + " attempts: " + u.what());
            break;
          }
        } catch (const Error& pe) {
          fail_run(i, "evaluator protocol error at " + id + ": " + pe.what());
          break;
        }
      }
      if (!e.done) return;
      if (e.eval) {
        // Read-only against indexes that nobody writes until every worker has
        // joined; the serial commit step re-verifies.
        e.signature = corpus_.signature_of(g.source);
        e.verdict = assess(*e.signature, corpus_.train_index(), archive_, policy);
      }
    }
  };

  if (pool_.size() == 1) {
    work(*pool_.front());
  } else {
    std::vector<std::thread> threads;
    for (auto& ev : pool_) threads.emplace_back(work, std::ref(*ev));
    for (auto& t : threads) t.join();
  }
  // Keep only the id-ordered prefix that finished.
  std::size_t prefix = 0;
  while (prefix < n && out[prefix].done) ++prefix;
  if (prefix < n && !abort_reason) abort_reason = "candidate " + candidate_id(cycle, static_cast<int>(prefix)) + " was not evaluated";
  out.resize(prefix);
  return out;
}

CycleOutcome Orchestrator::run_cycle(int cycle) {
  if (cycle <= last_cycle_) throw ConfigError("cycles must run in increasing order");
  last_cycle_ = cycle;
  archive_.reset(cycle);
  rejections_.reset();

  CycleOutcome outcome;
  const int n = config_.samples_for(cycle);
  std::vector<GeneratedCandidate> generated;
  try {
    generated = generator_.generate(GenerationRequest{n, cycle, config_.seed, generator_state_});
    if (generated.size() != static_cast<std::size_t>(n)) {
      throw GenerationError("generator returned " + std::to_string(generated.size()) +
                            " candidates for " + std::to_string(n) + " slots");
    }
  } catch (const Error& e) {
    outcome.abort_reason = std::string("generator failed: ") + e.what();
    generated.clear();
  }

  std::vector<Evaluated> evaluated;
  if (!outcome.abort_reason) evaluated = evaluate(cycle, generated, outcome.abort_reason);

  const NoveltyPolicy policy{config_.tau, config_.ablations.novelty_filter_enabled};
  const bool iterate = config_.ablations.iteration_enabled;
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    Evaluated& e = evaluated[i];
    CandidateRecord rec;
    rec.id = candidate_id(cycle, static_cast<int>(i));
    rec.cycle = cycle;
    rec.source_code = generated[i].source;
    rec.validity = e.validity;
    rec.eval = e.eval;
    rec.failure = e.failure;
    if (!rec.trained()) {
      rec.disposition = Disposition::Invalid;
      outcome.records.push_back(std::move(rec));
      continue;
    }

    NoveltyVerdict v = reverify(*e.verdict, *e.signature, corpus_.train_index(), archive_, policy);
    const double acc = rec.eval->accuracy;
    if (config_.ablations.accuracy_threshold_enabled && acc < config_.accuracy_threshold) {
      rec.disposition = Disposition::BelowThreshold;
      v.rejection_count = rejections_.current();
    } else if (!v.accepted) {
      rec.disposition = Disposition::NearDuplicate;
      v.rejection_count = rejections_.current();
      rejections_.on_rejection();
    } else {
      rec.disposition = Disposition::Accepted;
      if (iterate) {
        CorpusRecord cr;
        cr.id = rec.id;
        cr.source_code = rec.source_code;
        cr.origin = Origin::Generated;
        cr.cycle_added = cycle;
        cr.accuracy = acc;
        cr.j_train_at_accept = v.j_train;
        cr.j_gen_at_accept = v.j_gen;
        cr.signature = *e.signature;
        try {
          corpus_.append_accepted(std::move(cr));
        } catch (const ConversionError& ce) {
          corpus_.log_drop(rec.id, "conversion_failed", ce.what());
          rec.disposition = Disposition::Invalid;
          rec.failure = std::string("conversion_failed: ") + ce.what();
        }
      }
      if (rec.disposition == Disposition::Accepted) v.rejection_count = rejections_.on_acceptance();
      else v.rejection_count = rejections_.current();
    }
    if (config_.archive_membership == ArchiveMembership::AllAssessed ||
        rec.disposition == Disposition::Accepted) {
      commit(archive_, rec.id, *e.signature);
    }
    rec.novelty = v;
    outcome.records.push_back(std::move(rec));
  }

  if (outcome.records.empty()) {
    outcome.stats.cycle = cycle;
    outcome.stats.threshold = config_.accuracy_threshold;
  } else {
    outcome.stats = summarize_cycle(outcome.records, config_.accuracy_threshold, config_.confidence);
  }
  outcome.stats.corpus_size_after = corpus_.pair_count();
  outcome.stats.complete = !outcome.abort_reason;

  {
    std::ofstream log(run_dir_ / "candidates.jsonl", std::ios::binary | std::ios::app);
    for (const auto& r : outcome.records) log << to_log_line(r) << '\n';
    if (!log) throw CorpusIoError("cannot append to candidate log");
  }

  if (!outcome.abort_reason) {
    if (iterate) {
      corpus_.snapshot();
      ++generator_state_;
    }
    fs::create_directories(run_dir_ / "finetune");
    write_finetune_manifest(corpus_, cycle + 1,
                            run_dir_ / "finetune" / ("cycle_" + cycle_tag(cycle) + ".json"));
  }
  archive_.reset(cycle + 1);
  return outcome;
}

RunReport Orchestrator::run() {
  RunReport report;
  report.config = config_;
  report.generator_id = generator_.id();
  report.evaluator_id = evaluator_id_;
  report.initial_records = corpus_.record_count();
  report.initial_pairs = corpus_.pair_count();

  fs::remove(run_dir_ / "candidates.jsonl");
  for (int c = last_cycle_ + 1; c <= config_.cycles; ++c) {
    CycleOutcome outcome = run_cycle(c);
    report.cycles.push_back(outcome.stats);
    for (auto& r : outcome.records) {
      r.source_code.clear();
      history_.push_back(std::move(r));
    }
    if (outcome.abort_reason) {
      report.abort_reason = "cycle " + std::to_string(c) + ": " + *outcome.abort_reason;
      break;
    }
  }
  report.pooled = pool_records(history_, config_.accuracy_threshold, config_.confidence);
  write_reports(report);
  return report;
}

void Orchestrator::write_reports(const RunReport& report) const {
  write_text(run_dir_ / "run_report.json", to_json(report).dump(2) + "\n");
  if (!report.cycles.empty()) {
    write_text(run_dir_ / "report.csv", emit_report(report.cycles, ReportFormat::Csv));
    write_text(run_dir_ / "report.md", emit_report(report.cycles, ReportFormat::Markdown));
    write_text(run_dir_ / "plot_data.csv", emit_plot_data(report.cycles));
  }
  const ordered_json manifest{
      {"tool", "archloop"},
      {"version", ARCHLOOP_VERSION},
      {"seed", config_.seed},
      {"config", to_json(config_)},
      {"generator_id", report.generator_id},
      {"evaluator_id", report.evaluator_id},
      {"corpus",
       {{"initial_records", report.initial_records},
        {"initial_pairs", report.initial_pairs},
        {"k", corpus_.config().k},
        {"num_perm", corpus_.config().num_perm},
        {"signature_seed", corpus_.config().seed}}},
  };
  write_text(run_dir_ / "manifest.json", manifest.dump(2) + "\n");
}

void copy_corpus(const fs::path& from, const fs::path& to) {
  if (!fs::exists(from / "meta.json")) throw CorpusIoError("no corpus at " + from.string());
  if (fs::exists(to) && !fs::is_empty(to)) {
    throw CorpusIoError("refusing to overwrite non-empty " + to.string());
  }
  std::error_code ec;
  fs::create_directories(to, ec);
  fs::copy(from, to, fs::copy_options::recursive, ec);
  if (ec) throw CorpusIoError("copying corpus failed: " + ec.message());
}

}  // namespace archloop
