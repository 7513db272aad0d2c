#include <doctest.h>

#include <cmath>

#include "archloop/error.hpp"
#include "archloop/gateway.hpp"
#include "archloop/sidecar.hpp"
#include "archloop/simulated.hpp"
#include "support.hpp"

using namespace archloop;

namespace {

void replace_first(std::string& s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  REQUIRE(at != std::string::npos);
  s.replace(at, from.size(), to);
}

SimulatedGeneratorConfig clean_config() {
  SimulatedGeneratorConfig cfg;
  cfg.fault_rate = {0.0, 0.0, 1};
  cfg.api_fault_rate = {0.0, 0.0, 1};
  return cfg;
}

}  // namespace

TEST_CASE("validity report factories") {
  const ValidityReport ok = ValidityReport::passed();
  CHECK(ok.valid());
  CHECK(ok.parse_ok());
  CHECK_FALSE(ok.failure_stage().has_value());

  const ValidityReport f = ValidityReport::failed_at(Stage::Forward, "shape mismatch");
  CHECK(f.parse_ok());
  CHECK(f.instantiate_ok());
  CHECK_FALSE(f.forward_ok());
  CHECK_FALSE(f.contract_ok());
  CHECK(f.failure_stage() == std::optional<Stage>(Stage::Forward));
  CHECK(f.message() == "shape mismatch");
  CHECK_FALSE(f.valid());
}

TEST_CASE("stage order is enforced for every flag combination") {
  for (int mask = 0; mask < 16; ++mask) {
    const bool p = mask & 1, i = mask & 2, f = mask & 4, c = mask & 8;
    const bool ordered = (!i || p) && (!f || i) && (!c || f);
    if (!ordered) {
      CHECK_THROWS_AS(ValidityReport::from_flags(p, i, f, c), InvalidReport);
      continue;
    }
    const ValidityReport r = ValidityReport::from_flags(p, i, f, c);
    CHECK(r.valid() == (p && i && f && c));
    const int passed = p + i + f + c;
    if (passed == 4) {
      CHECK_FALSE(r.failure_stage().has_value());
    } else {
      CHECK(r.failure_stage() == std::optional<Stage>(static_cast<Stage>(passed)));
      CHECK(r == ValidityReport::failed_at(static_cast<Stage>(passed), ""));
    }
  }
}

TEST_CASE("simulated generation is a pure function of the request") {
  SimulatedGenerator a({}, 42), b({}, 42);
  const GenerationRequest req{30, 3, 7, 2};
  const auto x = a.generate(req);
  const auto y = b.generate(req);
  REQUIRE(x.size() == 30);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x[i].source == y[i].source);
  const auto z = a.generate({30, 4, 7, 2});
  int same = 0;
  for (std::size_t i = 0; i < x.size(); ++i) same += x[i].source == z[i].source;
  CHECK(same < 30);
  CHECK_THROWS_AS(a.generate({0, 1, 7, 0}), GenerationError);
}

TEST_CASE("fault rate zero gives parseable candidates, one gives parse failures") {
  SimulatedGenerator clean(clean_config(), 1);
  for (const auto& c : clean.generate({200, 1, 3, 0})) {
    const ValidityReport r = check_candidate_structure(c.source);
    CHECK(r.parse_ok());
    CHECK(r.valid());
  }
  SimulatedGeneratorConfig broken_cfg = clean_config();
  broken_cfg.fault_rate = {1.0, 1.0, 1};
  SimulatedGenerator broken(broken_cfg, 1);
  for (const auto& c : broken.generate({200, 1, 3, 0})) {
    const ValidityReport r = check_candidate_structure(c.source);
    CHECK_FALSE(r.parse_ok());
    CHECK(r.failure_stage() == std::optional<Stage>(Stage::Parse));
  }
}

TEST_CASE("api faults fail after the parse stage") {
  SimulatedGeneratorConfig cfg = clean_config();
  cfg.api_fault_rate = {1.0, 1.0, 1};
  SimulatedGenerator gen(cfg, 9);
  for (const auto& c : gen.generate({100, 1, 3, 0})) {
    const ValidityReport r = check_candidate_structure(c.source);
    CHECK(r.parse_ok());
    CHECK_FALSE(r.valid());
  }
}

TEST_CASE("default generator mixes valid and invalid candidates") {
  SimulatedGenerator gen({}, 5);
  int valid = 0;
  const int n = 2000;
  for (const auto& c : gen.generate({n, 1, 11, 0})) valid += check_candidate_structure(c.source).valid();
  const double rate = static_cast<double>(valid) / n;
  // 1 - 0.336 - 0.664 * 0.337 = 0.440
  CHECK(rate == doctest::Approx(0.44).epsilon(0.1));
}

TEST_CASE("repeat mode emits every candidate twice") {
  SimulatedGeneratorConfig cfg;
  cfg.repeat_each = true;
  SimulatedGenerator gen(cfg, 5);
  const auto out = gen.generate({11, 1, 1, 0});
  REQUIRE(out.size() == 11);
  for (std::size_t i = 0; i + 1 < out.size(); i += 2) CHECK(out[i].source == out[i + 1].source);
}

TEST_CASE("marker grammar stages") {
  const std::string good = synthesize_candidate(12);
  CHECK(check_candidate_structure(good).valid());

  std::string missing_hp = good;
  replace_first(missing_hp, "def supported_hyperparameters():", "def hyperparameters():");
  const ValidityReport a = check_candidate_structure(missing_hp);
  CHECK_FALSE(a.contract_ok());
  CHECK(a.failure_stage() == std::optional<Stage>(Stage::Contract));

  std::string narrow = good;
  replace_first(narrow, "return {'lr', 'momentum'}", "return {'lr', 'momentum', 'dropout'}");
  CHECK(check_candidate_structure(narrow).failure_stage() == std::optional<Stage>(Stage::Contract));

  std::string no_net = good;
  replace_first(no_net, "class Net(", "class Network(");
  CHECK(check_candidate_structure(no_net).failure_stage() == std::optional<Stage>(Stage::Instantiate));

  // Residual blocks define forward too; drop every one.
  std::string no_forward = good;
  for (auto at = no_forward.find("def forward("); at != std::string::npos;
       at = no_forward.find("def forward(")) {
    no_forward.replace(at, 12, "def fwd(");
  }
  CHECK(check_candidate_structure(no_forward).failure_stage() == std::optional<Stage>(Stage::Forward));

  const std::string truncated = good.substr(0, good.find("nn.Sequential(") + 20);
  CHECK_FALSE(check_candidate_structure(truncated).parse_ok());

  std::string no_colon = good;
  replace_first(no_colon, "def forward(self, x):", "def forward(self, x)");
  CHECK(check_candidate_structure(no_colon).failure_stage() == std::optional<Stage>(Stage::Parse));

  CHECK_FALSE(check_candidate_structure("").valid());
}

TEST_CASE("simulated accuracy is deterministic and bounded") {
  SimulatedEvaluator ev;
  const std::string src = synthesize_candidate(3);
  const EvalContext ctx;
  const EvalResult a = ev.train_one_epoch("x", src, ctx);
  const EvalResult b = ev.train_one_epoch("y", src, ctx);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.wall_time == b.wall_time);
  CHECK(a.evaluator_id == ev.id());

  SimulatedEvaluatorConfig wide;
  wide.accuracy_sd = 2.0;
  SimulatedEvaluator noisy(wide);
  for (std::uint64_t s = 0; s < 300; ++s) {
    const double acc = noisy.train_one_epoch("z", synthesize_candidate(s), ctx).accuracy;
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
}

TEST_CASE("simulated mean accuracy matches its configuration") {
  SimulatedEvaluatorConfig cfg;
  cfg.mean_accuracy = {0.28, 0.50, 17};
  cfg.seed = 1234;
  SimulatedEvaluator ev(cfg);
  double sum = 0.0;
  const int n = 500;
  for (int i = 0; i < n; ++i) {
    sum += ev.train_one_epoch("c", synthesize_candidate(10'000 + i), EvalContext{1, 0}).accuracy;
  }
  CHECK(std::abs(sum / n - 0.28) <= 0.02);

  // The mean follows the generator state.
  double late = 0.0;
  for (int i = 0; i < n; ++i) {
    late += ev.train_one_epoch("c", synthesize_candidate(20'000 + i), EvalContext{18, 17}).accuracy;
  }
  CHECK(std::abs(late / n - 0.50) <= 0.02);
}

TEST_CASE("ramp interpolates and saturates") {
  const Ramp r{0.2, 0.6, 4};
  CHECK(r.at(0) == doctest::Approx(0.2));
  CHECK(r.at(2) == doctest::Approx(0.4));
  CHECK(r.at(4) == doctest::Approx(0.6));
  CHECK(r.at(40) == doctest::Approx(0.6));
}

TEST_CASE("command generator runs once per slot with the loop environment") {
  CommandGenerator gen("printf 'class Net:  # cycle=%s slot=%s state=%s' \"$ARCHLOOP_CYCLE\" "
                       "\"$ARCHLOOP_SLOT\" \"$ARCHLOOP_GENERATOR_STATE\"");
  const auto out = gen.generate({3, 5, 1, 2});
  REQUIRE(out.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK_FALSE(out[i].error.has_value());
    CHECK(out[i].source == "class Net:  # cycle=5 slot=" + std::to_string(i) + " state=2");
  }
}

TEST_CASE("command generator failures mark the slot") {
  CommandGenerator failing("exit 3");
  const auto bad = failing.generate({2, 1, 0, 0});
  REQUIRE(bad.size() == 2);
  CHECK(bad[0].error.has_value());
  CHECK(bad[0].source.empty());

  CommandGenerator slow("sleep 5", std::chrono::milliseconds(200));
  const auto late = slow.generate({1, 1, 0, 0});
  REQUIRE(late.size() == 1);
  REQUIRE(late[0].error.has_value());
  CHECK(late[0].error->find("timed out") != std::string::npos);
}
