#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "archloop/gateway.hpp"
#include "archloop/novelty.hpp"

namespace archloop {

enum class Disposition { Invalid, BelowThreshold, NearDuplicate, Accepted };

std::string_view to_string(Disposition d);
Disposition disposition_from_string(std::string_view s);

// One generated candidate and everything the pipeline learned about it.
// Stage order: validity, then eval (valid only), then novelty (trained only).
struct CandidateRecord {
  std::string id;
  int cycle = 1;
  std::string source_code;
  ValidityReport validity = ValidityReport::failed_at(Stage::Parse, "not evaluated");
  std::optional<EvalResult> eval;
  std::optional<NoveltyVerdict> novelty;
  Disposition disposition = Disposition::Invalid;
  // Generation or training failure, when that is why the candidate is invalid.
  std::optional<std::string> failure;

  // Passed validity and produced a training result.
  bool trained() const { return validity.valid() && eval.has_value(); }
};

}  // namespace archloop
