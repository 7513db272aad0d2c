#include "archloop/error.hpp"
#include "archloop/gateway.hpp"

namespace archloop {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Parse: return "parse";
    case Stage::Instantiate: return "instantiate";
    case Stage::Forward: return "forward";
    case Stage::Contract: return "contract";
  }
  return "unknown";
}

ValidityReport ValidityReport::passed(std::string message) {
  ValidityReport r;
  r.parse_ok_ = r.instantiate_ok_ = r.forward_ok_ = r.contract_ok_ = true;
  r.message_ = std::move(message);
  return r;
}

ValidityReport ValidityReport::failed_at(Stage stage, std::string message) {
  ValidityReport r;
  r.parse_ok_ = stage > Stage::Parse;
  r.instantiate_ok_ = stage > Stage::Instantiate;
  r.forward_ok_ = stage > Stage::Forward;
  r.contract_ok_ = false;
  r.failure_stage_ = stage;
  r.message_ = std::move(message);
  return r;
}

ValidityReport ValidityReport::from_flags(bool parse_ok, bool instantiate_ok, bool forward_ok,
                                          bool contract_ok, std::string message) {
  const bool flags[] = {parse_ok, instantiate_ok, forward_ok, contract_ok};
  for (int i = 1; i < 4; ++i) {
    if (flags[i] && !flags[i - 1]) {
      throw InvalidReport("validity stages out of order: " +
                          std::string(to_string(static_cast<Stage>(i))) + " passed after " +
                          std::string(to_string(static_cast<Stage>(i - 1))) + " failed");
    }
  }
  for (int i = 0; i < 4; ++i) {
    if (!flags[i]) return failed_at(static_cast<Stage>(i), std::move(message));
  }
  return passed(std::move(message));
}

}  // namespace archloop
