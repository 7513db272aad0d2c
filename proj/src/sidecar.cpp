#include "archloop/sidecar.hpp"

#include <json.hpp>

#include "archloop/error.hpp"

namespace archloop {

using ordered_json = nlohmann::ordered_json;

namespace {

bool get_bool(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_boolean()) {
    throw ProtocolError(std::string("sidecar response lacks boolean '") + key + "'");
  }
  return it->get<bool>();
}

std::string error_text(const nlohmann::json& j) {
  auto it = j.find("error");
  if (it == j.end() || it->is_null()) return {};
  return it->is_string() ? it->get<std::string>() : it->dump();
}

}  // namespace

SidecarEvaluator::SidecarEvaluator(SidecarOptions options) : options_(std::move(options)) {}

SidecarEvaluator::~SidecarEvaluator() = default;

std::string SidecarEvaluator::id() const {
  return evaluator_id_.empty() ? "sidecar:" + options_.command : evaluator_id_;
}

void SidecarEvaluator::restart() {
  if (child_) {
    child_->kill();
    child_->wait();
  }
  child_.reset();
}

std::string SidecarEvaluator::round_trip(const std::string& request, std::chrono::milliseconds timeout) {
  if (!child_->write_all(request + "\n")) {
    restart();
    throw EvaluatorUnavailable("sidecar closed its input");
  }
  auto line = child_->read_line(timeout);
  if (!line) {
    const bool timed_out = child_->timed_out();
    restart();
    throw EvaluatorUnavailable(timed_out ? "sidecar timed out" : "sidecar exited");
  }
  return *line;
}

void SidecarEvaluator::ensure_started() {
  if (child_) return;
  try {
    child_ = std::make_unique<ChildProcess>(options_.command);
  } catch (const Error& e) {
    throw EvaluatorUnavailable(e.what());
  }
  const std::string reply = round_trip(ordered_json{{"op", "hello"}}.dump(), options_.handshake_timeout);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(reply);
  } catch (const nlohmann::json::parse_error&) {
    restart();
    throw ProtocolError("sidecar handshake is not JSON: " + reply);
  }
  const auto protocol = j.value("protocol", -1);
  if (protocol != kSidecarProtocol) {
    restart();
    throw ProtocolError("sidecar speaks unknown protocol " + j.value("protocol", nlohmann::json()).dump());
  }
  evaluator_id_ = j.value("evaluator_id", "sidecar:" + options_.command);
}

ValidityReport SidecarEvaluator::validate(std::string_view candidate_id, std::string_view source) {
  ensure_started();
  const ordered_json req{{"op", "validate"}, {"id", candidate_id}, {"source", source}};
  const std::string reply = round_trip(req.dump(), options_.timeout);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(reply);
  } catch (const nlohmann::json::parse_error&) {
    restart();
    throw ProtocolError("sidecar reply is not JSON: " + reply);
  }
  if (j.value("id", std::string()) != candidate_id) {
    restart();
    throw ProtocolError("sidecar reply id does not match request " + std::string(candidate_id));
  }
  std::string message = error_text(j);
  if (auto pc = j.find("param_count"); pc != j.end() && pc->is_number_integer()) {
    if (!message.empty()) message += "; ";
    message += "param_count=" + std::to_string(pc->get<long long>());
  }
  try {
    return ValidityReport::from_flags(get_bool(j, "parse_ok"), get_bool(j, "instantiate_ok"),
                                      get_bool(j, "forward_ok"), get_bool(j, "contract_ok"),
                                      std::move(message));
  } catch (const InvalidReport& e) {
    throw ProtocolError(std::string("sidecar sent inconsistent flags: ") + e.what());
  }
}

EvalResult SidecarEvaluator::train_one_epoch(std::string_view candidate_id, std::string_view source,
                                             const EvalContext& ctx) {
  ensure_started();
  const ordered_json req{{"op", "train_epoch"}, {"id", candidate_id}, {"source", source},
                         {"lr", ctx.lr},        {"momentum", ctx.momentum}};
  const std::string reply = round_trip(req.dump(), options_.timeout);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(reply);
  } catch (const nlohmann::json::parse_error&) {
    restart();
    throw ProtocolError("sidecar reply is not JSON: " + reply);
  }
  if (j.value("id", std::string()) != candidate_id) {
    restart();
    throw ProtocolError("sidecar reply id does not match request " + std::string(candidate_id));
  }
  if (const std::string err = error_text(j); !err.empty()) throw RuntimeFailure(err);
  auto acc = j.find("accuracy");
  if (acc == j.end() || !acc->is_number()) throw ProtocolError("sidecar reply lacks accuracy");
  EvalResult r;
  r.accuracy = acc->get<double>();
  if (!(r.accuracy >= 0.0 && r.accuracy <= 1.0)) {
    throw ProtocolError("sidecar accuracy outside [0, 1]: " + acc->dump());
  }
  r.wall_time = j.value("wall_time_s", 0.0);
  r.evaluator_id = id();
  return r;
}

}  // namespace archloop
