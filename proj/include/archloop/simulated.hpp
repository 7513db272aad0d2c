#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "archloop/gateway.hpp"

namespace archloop {

// Linear ramp from `start` to `end` over `rounds` fine-tune rounds.
struct Ramp {
  double start = 0.0;
  double end = 0.0;
  int rounds = 1;

  double at(int generator_state) const;
};

struct SimulatedGeneratorConfig {
  // Template pool shared by every cycle; non-fresh candidates are small
  // mutations of a pool entry, which is where near duplicates come from.
  int template_pool_size = 24;
  // Probability of an entirely fresh architecture instead of a pool mutation.
  Ramp fresh_rate{0.55, 0.85, 17};
  // Probability of a deliberate syntax fault (truncation, missing colon);
  // such candidates fail the parse stage.
  Ramp fault_rate{0.336, 0.27, 17};
  // Probability, for syntactically clean candidates, of an API-contract
  // fault (renamed Net, missing forward/learn, wrong hyperparameter set).
  Ramp api_fault_rate{0.337, 0.247, 17};
  // Emit every candidate twice in a row (ablation probes).
  bool repeat_each = false;
};

// Deterministic stand-in for the LLM: candidates are a pure function of
// (config, request). Same request, same list.
class SimulatedGenerator : public Generator {
 public:
  explicit SimulatedGenerator(SimulatedGeneratorConfig config = {}, std::uint64_t pool_seed = 0);

  std::string id() const override { return "simulated-generator/1"; }
  std::vector<GeneratedCandidate> generate(const GenerationRequest& request) override;

  const SimulatedGeneratorConfig& config() const { return config_; }

 private:
  SimulatedGeneratorConfig config_;
  std::uint64_t pool_seed_;
};

/// Renders a well-formed candidate (all four validity stages pass under the
/// simulated validator) from `seed`. Used for seed-corpus synthesis.
std::string synthesize_candidate(std::uint64_t seed);

struct SimulatedEvaluatorConfig {
  // Mean first-epoch accuracy as a function of the generator state.
  Ramp mean_accuracy{0.2806, 0.50, 17};
  double accuracy_sd = 0.07;
  std::uint64_t seed = 0;
};

// Marker-grammar validator plus a seeded accuracy model. Stateless and safe
// to share across threads.
class SimulatedEvaluator : public Evaluator {
 public:
  explicit SimulatedEvaluator(SimulatedEvaluatorConfig config = {});

  std::string id() const override { return "simulated-evaluator/1"; }
  ValidityReport validate(std::string_view candidate_id, std::string_view source) override;
  EvalResult train_one_epoch(std::string_view candidate_id, std::string_view source,
                             const EvalContext& ctx) override;

 private:
  SimulatedEvaluatorConfig config_;
};

/// The simulated validator's checks: balanced structure and terminated
/// literals (parse), `class Net` with `__init__` (instantiate), `forward`
/// (forward), `train_setup`, `learn` and `supported_hyperparameters`
/// returning exactly {"lr", "momentum"} (contract).
ValidityReport check_candidate_structure(std::string_view source);

}  // namespace archloop
