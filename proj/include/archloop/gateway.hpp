#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace archloop {

enum class Stage { Parse, Instantiate, Forward, Contract };

std::string_view to_string(Stage s);

// Outcome of the four ordered validity stages. A failure at one stage forces
// every later stage to false; construction rejects any other combination.
class ValidityReport {
 public:
  static ValidityReport passed(std::string message = {});
  static ValidityReport failed_at(Stage stage, std::string message);

  /// Builds from raw flags (e.g. a sidecar response). Throws InvalidReport if
  /// a later stage is true after an earlier false one.
  static ValidityReport from_flags(bool parse_ok, bool instantiate_ok, bool forward_ok,
                                   bool contract_ok, std::string message = {});

  bool parse_ok() const { return parse_ok_; }
  bool instantiate_ok() const { return instantiate_ok_; }
  bool forward_ok() const { return forward_ok_; }
  bool contract_ok() const { return contract_ok_; }
  std::optional<Stage> failure_stage() const { return failure_stage_; }
  const std::string& message() const { return message_; }
  bool valid() const { return contract_ok_; }

  friend bool operator==(const ValidityReport&, const ValidityReport&) = default;

 private:
  ValidityReport() = default;

  bool parse_ok_ = false;
  bool instantiate_ok_ = false;
  bool forward_ok_ = false;
  bool contract_ok_ = false;
  std::optional<Stage> failure_stage_;
  std::string message_;
};

struct EvalResult {
  double accuracy = 0.0;  // first-epoch top-1 validation accuracy, in [0, 1]
  double wall_time = 0.0;
  std::string evaluator_id;
};

// What the evaluator may condition on besides the source text.
struct EvalContext {
  int cycle = 1;
  // Number of fine-tune rounds the generator has been through.
  int generator_state = 0;
  double lr = 0.01;
  double momentum = 0.9;
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual std::string id() const = 0;

  /// Throws EvaluatorUnavailable when the backend cannot answer.
  virtual ValidityReport validate(std::string_view candidate_id, std::string_view source) = 0;

  /// Precondition: validate() returned valid. Throws RuntimeFailure when the
  /// candidate raised during training, EvaluatorUnavailable on transport
  /// problems.
  virtual EvalResult train_one_epoch(std::string_view candidate_id, std::string_view source,
                                     const EvalContext& ctx) = 0;
};

// One evaluator per worker.
using EvaluatorFactory = std::function<std::unique_ptr<Evaluator>()>;

struct GeneratedCandidate {
  std::string source;
  // Set when the slot failed (timeout, nonzero exit); `source` is then empty.
  std::optional<std::string> error;
};

struct GenerationRequest {
  int n = 1;
  int cycle = 1;
  std::uint64_t seed = 0;
  int generator_state = 0;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string id() const = 0;
  virtual std::vector<GeneratedCandidate> generate(const GenerationRequest& request) = 0;
};

}  // namespace archloop
