// archloop: ingest a seed corpus, run the synthesis loop, render reports.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "archloop/corpus.hpp"
#include "archloop/error.hpp"
#include "archloop/hash.hpp"
#include "archloop/orchestrator.hpp"
#include "archloop/report.hpp"
#include "archloop/sidecar.hpp"
#include "archloop/simulated.hpp"

namespace fs = std::filesystem;
using namespace archloop;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitAborted = 2;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CorpusIoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_ingest(const fs::path& input, const fs::path& out, const CorpusConfig& cfg) {
  CorpusStore store = fs::exists(out / "meta.json") ? CorpusStore::open(out)
                                                    : CorpusStore::create(out, cfg);
  const IngestReport r = ingest_seed(input, store);
  store.snapshot();
  nlohmann::ordered_json j{{"total", r.total},
                           {"malformed", r.malformed},
                           {"unique_after_dedup", r.unique_after_dedup},
                           {"converted", r.converted},
                           {"dropped", r.dropped},
                           {"pairs", r.pairs},
                           {"drops_by_reason", r.drops_by_reason},
                           {"corpus_records", store.record_count()},
                           {"corpus_pairs", store.pair_count()}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_synth_seed(std::size_t count, std::uint64_t seed, const fs::path& out) {
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw CorpusIoError("cannot write " + out.string());
  for (std::size_t i = 0; i < count; ++i) {
    f << nlohmann::json{{"code", synthesize_candidate(hash_combine(seed, i))}}.dump() << '\n';
  }
  return 0;
}

struct RunArgs {
  fs::path corpus;
  fs::path out;
  RunConfig config;
  std::string samples_schedule;
  std::string membership = "all";
  std::string evaluator = "simulated";
  std::string generator = "simulated";
  bool no_novelty = false;
  bool no_threshold = false;
  bool no_iteration = false;
};

std::vector<int> parse_schedule(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad samples schedule entry '" + item + "'");
    }
  }
  return out;
}

int cmd_run(RunArgs a) {
  RunConfig& cfg = a.config;
  cfg.ablations = {!a.no_novelty, !a.no_threshold, !a.no_iteration};
  if (!a.samples_schedule.empty()) cfg.samples_schedule = parse_schedule(a.samples_schedule);
  if (a.membership == "all") cfg.archive_membership = ArchiveMembership::AllAssessed;
  else if (a.membership == "accepted") cfg.archive_membership = ArchiveMembership::AcceptedOnly;
  else throw ConfigError("archive membership must be 'all' or 'accepted'");
  cfg.validate();

  std::unique_ptr<Generator> generator;
  if (a.generator == "simulated") {
    generator = std::make_unique<SimulatedGenerator>(SimulatedGeneratorConfig{}, cfg.seed);
  } else if (a.generator.rfind("command:", 0) == 0) {
    generator = std::make_unique<CommandGenerator>(a.generator.substr(8));
  } else {
    throw ConfigError("generator must be 'simulated' or 'command:<cmd>'");
  }

  EvaluatorFactory factory;
  if (a.evaluator == "simulated") {
    SimulatedEvaluatorConfig ecfg;
    ecfg.seed = mix64(cfg.seed);
    factory = [ecfg] { return std::make_unique<SimulatedEvaluator>(ecfg); };
  } else if (a.evaluator.rfind("sidecar:", 0) == 0) {
    SidecarOptions opts;
    opts.command = a.evaluator.substr(8);
    factory = [opts] { return std::make_unique<SidecarEvaluator>(opts); };
  } else {
    throw ConfigError("evaluator must be 'simulated' or 'sidecar:<cmd>'");
  }

  // The run works on its own copy so the input corpus stays reusable.
  const fs::path corpus_dir = a.out / "corpus";
  copy_corpus(a.corpus, corpus_dir);
  CorpusStore store = CorpusStore::open(corpus_dir);
  Orchestrator orch(cfg, store, *generator, factory, a.out);
  const RunReport report = orch.run();
  if (!report.cycles.empty()) std::cout << emit_report(report.cycles, ReportFormat::Markdown);
  if (report.aborted()) {
    std::cerr << "archloop: run aborted: " << *report.abort_reason << '\n';
    return kExitAborted;
  }
  return 0;
}

int cmd_report(const fs::path& run, const std::string& format) {
  const ReportFormat fmt = parse_report_format(format);
  const auto stats = parse_report_csv(read_file(run / "report.csv"));
  std::cout << emit_report(stats, fmt);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop architecture synthesis harness"};
  app.require_subcommand(1);

  fs::path ingest_input, ingest_out;
  CorpusConfig corpus_cfg;
  auto* ingest = app.add_subcommand("ingest", "Build or extend a corpus from JSONL snippets");
  ingest->add_option("--input", ingest_input, "JSONL file with a \"code\" field per line")->required();
  ingest->add_option("--out", ingest_out, "Corpus directory")->required();
  ingest->add_option("--k", corpus_cfg.k, "Shingle width");
  ingest->add_option("--num-perm", corpus_cfg.num_perm, "MinHash permutations");
  ingest->add_option("--hash-seed", corpus_cfg.seed, "MinHash seed");
  ingest->add_option("--tau", corpus_cfg.tau, "Dedup threshold");

  std::size_t synth_count = 100;
  std::uint64_t synth_seed = 0;
  fs::path synth_out;
  auto* synth = app.add_subcommand("synth-seed", "Write simulated seed snippets as JSONL");
  synth->add_option("--count", synth_count)->required();
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out", synth_out)->required();

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run the generate-evaluate-select loop");
  run->add_option("--corpus", ra.corpus, "Seed corpus directory (copied, not modified)")->required();
  run->add_option("--out", ra.out, "Run directory")->required();
  run->add_option("--cycles", ra.config.cycles);
  run->add_option("--samples", ra.config.samples_per_cycle, "Candidates per cycle");
  run->add_option("--samples-schedule", ra.samples_schedule, "Comma-separated per-cycle counts");
  run->add_option("--threshold", ra.config.accuracy_threshold);
  run->add_option("--tau", ra.config.tau);
  run->add_option("--k", ra.config.k);
  run->add_option("--num-perm", ra.config.num_perm);
  run->add_option("--seed", ra.config.seed);
  run->add_option("--workers", ra.config.workers);
  run->add_option("--retries", ra.config.retry_budget, "Evaluator retries before aborting");
  run->add_option("--archive-membership", ra.membership, "all | accepted");
  run->add_option("--lr", ra.config.lr);
  run->add_option("--momentum", ra.config.momentum);
  run->add_flag("--no-novelty-filter", ra.no_novelty);
  run->add_flag("--no-accuracy-threshold", ra.no_threshold);
  run->add_flag("--no-iteration", ra.no_iteration);
  run->add_option("--evaluator", ra.evaluator, "simulated | sidecar:<cmd>");
  run->add_option("--generator", ra.generator, "simulated | command:<cmd>");

  fs::path report_run;
  std::string report_format = "md";
  auto* report = app.add_subcommand("report", "Render a finished run's per-cycle table");
  report->add_option("--run", report_run)->required();
  report->add_option("--format", report_format, "csv | md");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_input, ingest_out, corpus_cfg);
    if (*synth) return cmd_synth_seed(synth_count, synth_seed, synth_out);
    if (*run) return cmd_run(ra);
    if (*report) return cmd_report(report_run, report_format);
  } catch (const ConfigError& e) {
    std::cerr << "archloop: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnknownFormat& e) {
    std::cerr << "archloop: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "archloop: " << e.what() << '\n';
    return kExitAborted;
  }
  return kExitConfig;
}
