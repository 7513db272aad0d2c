#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "archloop/gateway.hpp"
#include "archloop/subprocess.hpp"

namespace archloop {

inline constexpr int kSidecarProtocol = 1;

struct SidecarOptions {
  std::string command;
  std::chrono::milliseconds timeout{300'000};
  std::chrono::milliseconds handshake_timeout{30'000};
};

// Evaluator backed by a child process speaking line-delimited JSON on its
// standard streams:
//   {"op":"hello"} -> {"protocol":1,"evaluator_id":"..."}
//   {"op":"validate","id":..,"source":..} -> {"id":..,"parse_ok":b,...,"error":..}
//   {"op":"train_epoch","id":..,"source":..,"lr":f,"momentum":f}
//       -> {"id":..,"accuracy":f,"wall_time_s":f,"error":..}
// A timeout or dead pipe kills the child; the next call starts a fresh one.
class SidecarEvaluator : public Evaluator {
 public:
  explicit SidecarEvaluator(SidecarOptions options);
  ~SidecarEvaluator() override;

  std::string id() const override;
  ValidityReport validate(std::string_view candidate_id, std::string_view source) override;
  EvalResult train_one_epoch(std::string_view candidate_id, std::string_view source,
                             const EvalContext& ctx) override;

 private:
  void ensure_started();
  std::string round_trip(const std::string& request, std::chrono::milliseconds timeout);
  void restart();

  SidecarOptions options_;
  std::unique_ptr<ChildProcess> child_;
  std::string evaluator_id_;
};

// Generator that runs `command` once per slot and reads the candidate from
// its stdout. ARCHLOOP_CYCLE, ARCHLOOP_SLOT, ARCHLOOP_SEED and
// ARCHLOOP_GENERATOR_STATE are exported to the command.
class CommandGenerator : public Generator {
 public:
  explicit CommandGenerator(std::string command,
                            std::chrono::milliseconds timeout = std::chrono::milliseconds{600'000});

  std::string id() const override { return "command:" + command_; }
  std::vector<GeneratedCandidate> generate(const GenerationRequest& request) override;

 private:
  std::string command_;
  std::chrono::milliseconds timeout_;
};

}  // namespace archloop
