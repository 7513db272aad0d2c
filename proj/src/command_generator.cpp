#include "archloop/error.hpp"
#include "archloop/sidecar.hpp"

namespace archloop {

CommandGenerator::CommandGenerator(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {}

std::vector<GeneratedCandidate> CommandGenerator::generate(const GenerationRequest& request) {
  if (request.n < 1) throw GenerationError("generate needs n >= 1");
  std::vector<GeneratedCandidate> out;
  out.reserve(request.n);
  for (int slot = 0; slot < request.n; ++slot) {
    const Environment env = {
        {"ARCHLOOP_CYCLE", std::to_string(request.cycle)},
        {"ARCHLOOP_SLOT", std::to_string(slot)},
        {"ARCHLOOP_SEED", std::to_string(request.seed)},
        {"ARCHLOOP_GENERATOR_STATE", std::to_string(request.generator_state)},
    };
    GeneratedCandidate c;
    try {
      CommandResult r = run_command(command_, env, timeout_);
      if (r.timed_out) {
        c.error = "generator timed out";
      } else if (r.exit_code != 0) {
        c.error = "generator exited with status " + std::to_string(r.exit_code);
      } else {
        c.source = std::move(r.out);
      }
    } catch (const Error& e) {
      c.error = e.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace archloop
