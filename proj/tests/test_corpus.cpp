#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "archloop/chat.hpp"
#include "archloop/corpus.hpp"
#include "archloop/error.hpp"
#include "support.hpp"

using namespace archloop;
using testing::TempDir;

namespace {

std::string jsonl(const std::vector<std::string>& codes) {
  std::string out;
  for (const auto& c : codes) out += nlohmann::json{{"code", c}}.dump() + "\n";
  return out;
}

IngestReport ingest_text(CorpusStore& store, const std::string& text) {
  std::istringstream in(text);
  return ingest_seed(in, store);
}

CorpusRecord generated(const CorpusStore& store, std::string id, std::uint64_t seed) {
  CorpusRecord r;
  r.id = std::move(id);
  r.source_code = synthesize_candidate(seed);
  r.origin = Origin::Generated;
  r.cycle_added = 1;
  r.accuracy = 0.42;
  r.j_train_at_accept = 0.31;
  r.j_gen_at_accept = 0.0;
  r.signature = store.signature_of(r.source_code);
  return r;
}

}  // namespace

TEST_CASE("one snippet repeated a hundred times dedups to one") {
  TempDir dir;
  CorpusStore store = CorpusStore::create(dir / "c", {});
  const IngestReport r = ingest_text(store, jsonl(std::vector<std::string>(100, synthesize_candidate(1))));
  CHECK(r.total == 100);
  CHECK(r.unique_after_dedup == 1);
  CHECK(r.converted == 1);
  CHECK(r.pairs == 2);
  CHECK(store.record_count() == 1);
  CHECK(store.pair_count() == 2);
}

TEST_CASE("conversion failure is counted and logged, not fatal") {
  TempDir dir;
  CorpusStore store = CorpusStore::create(dir / "c", {});
  const std::string no_class =
      "def supported_hyperparameters():\n    return {'lr', 'momentum'}\n\n"
      "def build(in_shape, out_shape):\n    return [layer for layer in range(12) if layer % 2 == 0]\n";
  const IngestReport r =
      ingest_text(store, jsonl({synthesize_candidate(1), no_class, synthesize_candidate(2)}));
  CHECK(r.total == 3);
  CHECK(r.unique_after_dedup == 3);
  CHECK(r.converted == 2);
  CHECK(r.dropped == 1);
  CHECK(r.pairs == 4);
  CHECK(r.drops_by_reason.at("no_class_definition") == 1);
  const auto drops = testing::lines_of(testing::slurp(dir / "c/drops.jsonl"));
  REQUIRE(drops.size() == 1);
  CHECK(nlohmann::json::parse(drops[0]).at("reason") == "no_class_definition");
}

TEST_CASE("malformed lines are skipped") {
  TempDir dir;
  CorpusStore store = CorpusStore::create(dir / "c", {});
  const std::string text = "not json\n{\"nocode\": 1}\n\n" + jsonl({synthesize_candidate(4)});
  const IngestReport r = ingest_text(store, text);
  CHECK(r.malformed == 2);
  CHECK(r.converted == 1);
  CHECK(store.record_count() == 1);
}

TEST_CASE("ingest from a missing file is an io error") {
  TempDir dir;
  CorpusStore store = CorpusStore::create(dir / "c", {});
  CHECK_THROWS_AS(ingest_seed(dir / "nope.jsonl", store), CorpusIoError);
}

TEST_CASE("chat pairs per record origin") {
  CorpusRecord seed;
  seed.id = "seed-000000";
  seed.source_code = synthesize_candidate(3);
  const auto sp = to_chat_pairs(seed);
  REQUIRE(sp.size() == 2);
  CHECK(sp[0].assistant_code == sp[1].assistant_code);
  CHECK(sp[0].assistant_code == seed.source_code);
  CHECK(sp[0].variant != sp[1].variant);
  CHECK(sp[0].system_message == std::string(system_preamble()));
  CHECK(sp[0].user_message != sp[1].user_message);

  CorpusRecord gen = seed;
  gen.origin = Origin::Generated;
  CHECK(to_chat_pairs(gen).size() == 1);
  CHECK(to_chat_pairs(gen, ChatPolicy{2}).size() == 2);

  CorpusRecord bad = seed;
  bad.source_code = "x = 1\n";
  CHECK_THROWS_AS(to_chat_pairs(bad), ConversionError);
}

TEST_CASE("append to an empty corpus and reload") {
  TempDir dir;
  {
    CorpusStore store = CorpusStore::create(dir / "c", {});
    CHECK(store.append_accepted(generated(store, "c01-0000", 11)) == 1);
    CHECK(store.record_count() == 1);
    CHECK(store.pair_count() == 1);
  }
  CorpusStore back = CorpusStore::open(dir / "c");
  CHECK(back.record_count() == 1);
  CHECK(back.pair_count() == 1);
  const auto& r = back.records().front();
  CHECK(r.origin == Origin::Generated);
  CHECK(r.accuracy == std::optional<double>(0.42));
  CHECK(back.train_index().max_jaccard(r.signature).estimate == 1.0);
}

TEST_CASE("append rejects duplicates and forged signatures") {
  TempDir dir;
  CorpusStore store = CorpusStore::create(dir / "c", {});
  store.append_accepted(generated(store, "x", 1));
  CHECK_THROWS_AS(store.append_accepted(generated(store, "x", 2)), DuplicateId);
  CorpusRecord forged = generated(store, "y", 3);
  forged.signature = store.signature_of(synthesize_candidate(4));
  CHECK_THROWS_AS(store.append_accepted(forged), SignatureMismatch);
  CorpusRecord classless = generated(store, "z", 5);
  classless.source_code = "y = 2\n";
  classless.signature = store.signature_of(classless.source_code);
  CHECK_THROWS_AS(store.append_accepted(classless), ConversionError);
  CHECK(store.record_count() == 1);
}

TEST_CASE("creating over an existing corpus fails") {
  TempDir dir;
  { CorpusStore::create(dir / "c", {}); }
  CHECK_THROWS_AS(CorpusStore::create(dir / "c", {}), CorpusIoError);
  CHECK_THROWS_AS(CorpusStore::open(dir / "absent"), CorpusIoError);
}

TEST_CASE("crash recovery: snapshot plus tail reproduces queries") {
  TempDir dir;
  CorpusConfig cfg;
  cfg.snapshot_every = 8;
  std::vector<MinHashSignature> probes;
  std::vector<Match> before;
  std::size_t records = 0, pairs = 0;
  {
    CorpusStore store = CorpusStore::create(dir / "c", cfg);
    ingest_text(store, testing::seed_jsonl(20, 5));
    for (int i = 0; i < 13; ++i) store.append_accepted(generated(store, "g" + std::to_string(i), 900 + i));
    for (std::uint64_t s = 0; s < 30; ++s) {
      probes.push_back(store.signature_of(synthesize_candidate(s % 2 ? 900 + s : hash_combine(5, s))));
      before.push_back(store.train_index().max_jaccard(probes.back()));
    }
    records = store.record_count();
    pairs = store.pair_count();
  }
  CHECK(std::filesystem::exists(dir / "c/index.snap"));
  CorpusStore back = CorpusStore::open(dir / "c");
  CHECK(back.record_count() == records);
  CHECK(back.pair_count() == pairs);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Match m = back.train_index().max_jaccard(probes[i]);
    CHECK(m.id == before[i].id);
    CHECK(m.estimate == before[i].estimate);
  }
}

TEST_CASE("a torn final line is dropped on open") {
  TempDir dir;
  {
    CorpusStore store = CorpusStore::create(dir / "c", {});
    store.append_accepted(generated(store, "a", 1));
    store.append_accepted(generated(store, "b", 2));
  }
  const std::string full = testing::slurp(dir / "c/records.jsonl");
  {
    std::ofstream out(dir / "c/records.jsonl", std::ios::binary | std::ios::app);
    out << full.substr(0, full.size() / 3);  // half-written record, no newline
  }
  {
    CorpusStore back = CorpusStore::open(dir / "c");
    CHECK(back.record_count() == 2);
    CHECK(testing::slurp(dir / "c/records.jsonl") == full);
    back.append_accepted(generated(back, "c", 3));
  }
  CorpusStore again = CorpusStore::open(dir / "c");
  CHECK(again.record_count() == 3);
  CHECK(again.records().back().id == "c");
}

TEST_CASE("tampered stored signature is detected on open") {
  TempDir dir;
  {
    CorpusStore store = CorpusStore::create(dir / "c", {});
    store.append_accepted(generated(store, "a", 1));
  }
  const std::string line = testing::lines_of(testing::slurp(dir / "c/records.jsonl")).front();
  CorpusRecord r = record_from_json_line(line);
  r.signature.values[0] ^= 1;
  std::ofstream(dir / "c/records.jsonl", std::ios::binary | std::ios::trunc) << to_json_line(r) << "\n";
  std::filesystem::remove(dir / "c/index.snap");
  CHECK_THROWS_AS(CorpusStore::open(dir / "c"), SignatureMismatch);
}

TEST_CASE("record lines re-serialize byte for byte") {
  TempDir dir;
  {
    CorpusStore store = CorpusStore::create(dir / "c", {});
    ingest_text(store, testing::seed_jsonl(10, 2));
    store.append_accepted(generated(store, "gen-1", 77));
    CorpusRecord quirky = generated(store, "gen-\"2\"\t\x01", 78);
    quirky.accuracy.reset();
    quirky.j_gen_at_accept.reset();
    store.append_accepted(quirky);
  }
  const std::string text = testing::slurp(dir / "c/records.jsonl");
  std::string again;
  for (const auto& line : testing::lines_of(text)) {
    const CorpusRecord r = record_from_json_line(line);
    CHECK(to_json_line(r) == line);
    again += to_json_line(r) + "\n";
  }
  CHECK(again == text);
  CorpusStore back = CorpusStore::open(dir / "c");
  CHECK(back.records().back().id == "gen-\"2\"\t\x01");
  CHECK_FALSE(back.records().back().accuracy.has_value());
}

TEST_CASE("fine-tune manifest lists every pair and the adapter settings") {
  TempDir dir;
  CorpusStore store = CorpusStore::create(dir / "c", {});
  ingest_text(store, testing::seed_jsonl(5, 1));
  store.append_accepted(generated(store, "g", 3));
  write_finetune_manifest(store, 2, dir / "m.json");
  const auto j = nlohmann::json::parse(testing::slurp(dir / "m.json"));
  CHECK(j.at("for_cycle") == 2);
  CHECK(j.at("pair_count") == 11);
  CHECK(j.at("pairs").size() == 11);
  const auto& hp = j.at("hyperparameters");
  CHECK(hp.at("lora_rank") == 32);
  CHECK(hp.at("lora_alpha") == 32);
  CHECK(hp.at("lora_dropout") == 0.05);
  CHECK(hp.at("epochs") == 5);
  CHECK(hp.at("learning_rate") == 1e-5);
  CHECK(hp.at("effective_batch_size") == 4);
  CHECK(hp.at("lr_schedule") == "cosine");
  CHECK(hp.at("warmup_steps") == 20);
  CHECK(hp.at("weight_decay") == 0.01);
  CHECK(hp.at("max_grad_norm") == 1.0);
}
