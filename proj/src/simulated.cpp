#include "archloop/simulated.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "archloop/error.hpp"
#include "archloop/hash.hpp"
#include "archloop/lexer.hpp"

namespace archloop {

double Ramp::at(int generator_state) const {
  if (rounds <= 0) return end;
  const double t = std::clamp(static_cast<double>(generator_state) / rounds, 0.0, 1.0);
  return start + (end - start) * t;
}

// ---------------------------------------------------------------------------
// Candidate synthesis

namespace {

constexpr std::array<int, 8> kWidths = {16, 24, 32, 40, 48, 64, 96, 128};
constexpr std::array<const char*, 6> kActivations = {
    "nn.ReLU(inplace=True)", "nn.GELU()", "nn.SiLU()", "nn.LeakyReLU(0.1)", "nn.Hardswish()",
    "nn.ELU()"};
constexpr std::array<const char*, 3> kPools = {"nn.MaxPool2d(2)", "nn.AvgPool2d(2)", "stride"};

template <typename T, std::size_t N>
const T& pick(SplitMix64& rng, const std::array<T, N>& options) {
  return options[rng.below(N)];
}

struct StagePlan {
  int width = 32;
  int convs = 1;
  int kernel = 3;
  int activation = 0;
  bool batch_norm = true;
  int pool = 0;
  double dropout = 0.0;
  bool residual = false;
};

struct Plan {
  int stem_width = 32;
  std::vector<StagePlan> stages;
  std::vector<int> head_hidden;
  double head_dropout = 0.0;
  bool nesterov = false;
  double weight_decay = 0.0;
  double clip = 0.0;
  bool label_smoothing = false;
};

StagePlan random_stage(SplitMix64& rng) {
  StagePlan s;
  s.width = pick(rng, kWidths);
  s.convs = 1 + static_cast<int>(rng.below(3));
  s.kernel = rng.chance(0.7) ? 3 : (rng.chance(0.5) ? 5 : 1);
  s.activation = static_cast<int>(rng.below(kActivations.size()));
  s.batch_norm = rng.chance(0.8);
  s.pool = static_cast<int>(rng.below(kPools.size()));
  s.dropout = rng.chance(0.4) ? 0.05 * static_cast<double>(1 + rng.below(6)) : 0.0;
  s.residual = s.convs >= 2 && rng.chance(0.35);
  return s;
}

Plan random_plan(SplitMix64& rng) {
  Plan p;
  p.stem_width = pick(rng, kWidths);
  const int n_stages = 2 + static_cast<int>(rng.below(4));
  for (int i = 0; i < n_stages; ++i) p.stages.push_back(random_stage(rng));
  const int hidden = static_cast<int>(rng.below(3));
  for (int i = 0; i < hidden; ++i) p.head_hidden.push_back(64 * (1 + static_cast<int>(rng.below(4))));
  p.head_dropout = rng.chance(0.5) ? 0.1 * static_cast<double>(1 + rng.below(5)) : 0.0;
  p.nesterov = rng.chance(0.5);
  p.weight_decay = rng.chance(0.5) ? 5e-4 : 0.0;
  p.clip = rng.chance(0.4) ? static_cast<double>(1 + rng.below(5)) : 0.0;
  p.label_smoothing = rng.chance(0.3);
  return p;
}

// Layer-width edit, block duplication, activation or kernel swap.
void mutate(Plan& p, SplitMix64& rng) {
  auto& stage = p.stages[rng.below(p.stages.size())];
  switch (rng.below(4)) {
    case 0: stage.width = pick(rng, kWidths); break;
    case 1:
      if (p.stages.size() < 6) {
        const auto at = rng.below(p.stages.size());
        p.stages.insert(p.stages.begin() + static_cast<std::ptrdiff_t>(at), p.stages[at]);
      }
      break;
    case 2: stage.activation = static_cast<int>(rng.below(kActivations.size())); break;
    default: stage.kernel = stage.kernel == 3 ? 5 : 3; break;
  }
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << v;
  std::string s = os.str();
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos) s += ".0";
  return s;
}

std::string render_plan(const Plan& p) {
  std::ostringstream py;
  py << "import torch\nimport torch.nn as nn\n\n\n"
        "def supported_hyperparameters():\n    return {'lr', 'momentum'}\n\n\n";

  const bool any_residual =
      std::any_of(p.stages.begin(), p.stages.end(), [](const StagePlan& s) { return s.residual; });
  if (any_residual) {
    py << "class Residual(nn.Module):\n"
          "    def __init__(self, body, shortcut):\n"
          "        super().__init__()\n"
          "        self.body = body\n"
          "        self.shortcut = shortcut\n\n"
          "    def forward(self, x):\n"
          "        return self.body(x) + self.shortcut(x)\n\n\n";
  }

  py << "class Net(nn.Module):\n"
        "    def __init__(self, in_shape, out_shape, prm, device):\n"
        "        super().__init__()\n"
        "        self.device = device\n"
        "        self.features = nn.Sequential(\n";
  py << "            nn.Conv2d(3, " << p.stem_width << ", kernel_size=3, padding=1, bias=False),\n"
     << "            nn.BatchNorm2d(" << p.stem_width << "),\n"
     << "            nn.ReLU(inplace=True),\n";

  int channels = p.stem_width;
  int spatial = 32;
  for (const auto& s : p.stages) {
    const char* act = kActivations[s.activation];
    const bool stride = std::string_view(kPools[s.pool]) == "stride" && spatial > 2;
    auto conv_block = [&](std::ostringstream& out, const std::string& indent, int in, int out_ch,
                          int stride_v) {
      out << indent << "nn.Conv2d(" << in << ", " << out_ch << ", kernel_size=" << s.kernel
          << ", stride=" << stride_v << ", padding=" << s.kernel / 2 << ", bias="
          << (s.batch_norm ? "False" : "True") << "),\n";
      if (s.batch_norm) out << indent << "nn.BatchNorm2d(" << out_ch << "),\n";
      out << indent << act << ",\n";
    };
    if (s.residual) {
      py << "            Residual(\n                nn.Sequential(\n";
      for (int c = 0; c < s.convs; ++c) {
        conv_block(py, "                    ", c == 0 ? channels : s.width, s.width,
                   (c == 0 && stride) ? 2 : 1);
      }
      py << "                ),\n";
      py << "                nn.Conv2d(" << channels << ", " << s.width << ", kernel_size=1, stride="
         << (stride ? 2 : 1) << ", bias=False),\n";
      py << "            ),\n";
    } else {
      for (int c = 0; c < s.convs; ++c) {
        conv_block(py, "            ", c == 0 ? channels : s.width, s.width,
                   (c == 0 && stride) ? 2 : 1);
      }
    }
    if (stride) {
      spatial /= 2;
    } else if (spatial > 2) {
      py << "            " << kPools[s.pool] << ",\n";
      spatial /= 2;
    }
    if (s.dropout > 0) py << "            nn.Dropout2d(" << fmt_double(s.dropout) << "),\n";
    channels = s.width;
  }
  py << "        )\n"
        "        self.pool = nn.AdaptiveAvgPool2d(1)\n"
        "        self.classifier = nn.Sequential(\n"
        "            nn.Flatten(),\n";
  int in_features = channels;
  for (int h : p.head_hidden) {
    py << "            nn.Linear(" << in_features << ", " << h << "),\n"
       << "            nn.ReLU(inplace=True),\n";
    in_features = h;
  }
  if (p.head_dropout > 0) py << "            nn.Dropout(" << fmt_double(p.head_dropout) << "),\n";
  py << "            nn.Linear(" << in_features << ", 10),\n"
        "        )\n\n";

  py << "    def forward(self, x):\n"
        "        x = self.features(x)\n"
        "        x = self.pool(x)\n"
        "        return self.classifier(x)\n\n";

  py << "    def train_setup(self, prm):\n"
        "        self.to(self.device)\n";
  if (p.label_smoothing) {
    py << "        self.criteria = (nn.CrossEntropyLoss(label_smoothing=0.1).to(self.device),)\n";
  } else {
    py << "        self.criteria = (nn.CrossEntropyLoss().to(self.device),)\n";
  }
  py << "        self.optimizer = torch.optim.SGD(self.parameters(), lr=prm['lr'], "
        "momentum=prm['momentum']";
  if (p.nesterov) py << ", nesterov=True";
  if (p.weight_decay > 0) py << ", weight_decay=" << p.weight_decay;
  py << ")\n\n";

  py << "    def learn(self, train_data):\n"
        "        self.train()\n"
        "        for inputs, labels in train_data:\n"
        "            inputs, labels = inputs.to(self.device), labels.to(self.device)\n"
        "            self.optimizer.zero_grad()\n"
        "            loss = self.criteria[0](self(inputs), labels)\n"
        "            loss.backward()\n";
  if (p.clip > 0) {
    py << "            nn.utils.clip_grad_norm_(self.parameters(), " << fmt_double(p.clip) << ")\n";
  }
  py << "            self.optimizer.step()\n";
  return py.str();
}

enum class Fault { Truncate, MissingColon, RenameNet, DropForward, NarrowHyperparameters, DropLearn };

Fault pick_syntax_fault(SplitMix64& rng) {
  return rng.uniform() < 2.0 / 3.0 ? Fault::Truncate : Fault::MissingColon;
}

Fault pick_api_fault(SplitMix64& rng) {
  const double u = rng.uniform();
  if (u < 0.375) return Fault::RenameNet;
  if (u < 0.625) return Fault::DropForward;
  if (u < 0.875) return Fault::NarrowHyperparameters;
  return Fault::DropLearn;
}

void replace_first(std::string& s, std::string_view from, std::string_view to) {
  const auto at = s.find(from);
  if (at != std::string::npos) s.replace(at, from.size(), to);
}

std::string inject_fault(std::string code, Fault fault, SplitMix64& rng) {
  switch (fault) {
    case Fault::Truncate: {
      // Cut strictly inside the feature Sequential so a bracket stays open.
      const auto open = code.find("nn.Sequential(\n");
      const auto close = code.find("\n        )\n", open);
      const auto lo = open + std::string_view("nn.Sequential(").size();
      const auto span = close > lo ? close - lo : 1;
      code.resize(lo + rng.below(span));
      break;
    }
    case Fault::MissingColon: replace_first(code, "def forward(self, x):", "def forward(self, x)"); break;
    case Fault::RenameNet: replace_first(code, "class Net(nn.Module):", "class Model(nn.Module):"); break;
    case Fault::DropForward: replace_first(code, "def forward(self, x):\n        x = self.features",
                                           "def forwrd(self, x):\n        x = self.features");
      break;
    case Fault::NarrowHyperparameters: replace_first(code, "return {'lr', 'momentum'}", "return {'lr'}"); break;
    case Fault::DropLearn: replace_first(code, "def learn(self, train_data):", "def fit(self, train_data):"); break;
  }
  return code;
}

}  // namespace

SimulatedGenerator::SimulatedGenerator(SimulatedGeneratorConfig config, std::uint64_t pool_seed)
    : config_(config), pool_seed_(pool_seed) {}

std::vector<GeneratedCandidate> SimulatedGenerator::generate(const GenerationRequest& request) {
  if (request.n < 1) throw GenerationError("generate needs n >= 1");
  const double fresh = config_.fresh_rate.at(request.generator_state);
  const double faults = config_.fault_rate.at(request.generator_state);
  const double api_faults = config_.api_fault_rate.at(request.generator_state);
  const int pool = std::max(1, config_.template_pool_size);

  std::vector<GeneratedCandidate> out;
  out.reserve(request.n);
  const std::uint64_t cycle_seed = hash_combine(request.seed, static_cast<std::uint64_t>(request.cycle));
  for (int slot = 0; static_cast<int>(out.size()) < request.n; ++slot) {
    SplitMix64 rng(hash_combine(cycle_seed, static_cast<std::uint64_t>(slot)));
    Plan plan;
    if (rng.chance(fresh)) {
      plan = random_plan(rng);
    } else {
      SplitMix64 pool_rng(hash_combine(pool_seed_, rng.below(static_cast<std::uint64_t>(pool))));
      plan = random_plan(pool_rng);
      const int edits = 1 + static_cast<int>(rng.below(2));
      for (int e = 0; e < edits; ++e) mutate(plan, rng);
    }
    std::string code = render_plan(plan);
    if (rng.chance(faults)) {
      code = inject_fault(std::move(code), pick_syntax_fault(rng), rng);
    } else if (rng.chance(api_faults)) {
      code = inject_fault(std::move(code), pick_api_fault(rng), rng);
    }
    out.push_back({code, std::nullopt});
    if (config_.repeat_each && static_cast<int>(out.size()) < request.n) out.push_back({code, std::nullopt});
  }
  return out;
}

std::string synthesize_candidate(std::uint64_t seed) {
  SplitMix64 rng(mix64(seed ^ 0x5eed5eed5eed5eedULL));
  return render_plan(random_plan(rng));
}

// ---------------------------------------------------------------------------
// Validation

namespace {

bool is(const Token& t, TokenKind kind, std::string_view text) {
  return t.kind == kind && t.text == text;
}

std::string unquote(std::string_view lit) {
  std::size_t i = 0;
  while (i < lit.size() && lit[i] != '\'' && lit[i] != '"') ++i;
  lit.remove_prefix(i);
  const std::size_t q = (lit.size() >= 6 && lit[0] == lit[1] && lit[1] == lit[2]) ? 3 : 1;
  if (lit.size() < 2 * q) return std::string(lit);
  return std::string(lit.substr(q, lit.size() - 2 * q));
}

// Header `def name(...) [-> ann]:` or `class Name[(...)]:` must close with a
// colon at bracket depth zero.
bool headers_well_formed(const TokenSequence& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool def = is(t[i], TokenKind::Keyword, "def");
    const bool cls = is(t[i], TokenKind::Keyword, "class");
    if (!def && !cls) continue;
    if (i + 1 >= t.size() || t[i + 1].kind != TokenKind::Identifier) return false;
    std::size_t j = i + 2;
    if (def && (j >= t.size() || !is(t[j], TokenKind::Delimiter, "("))) return false;
    int depth = 0;
    bool closed = false;
    for (; j < t.size(); ++j) {
      const auto& tok = t[j];
      if (tok.kind == TokenKind::Delimiter) {
        if (tok.text == "(" || tok.text == "[" || tok.text == "{") ++depth;
        if (tok.text == ")" || tok.text == "]" || tok.text == "}") --depth;
        if (depth == 0 && tok.text == ":") {
          closed = true;
          break;
        }
      }
      if (depth == 0 && tok.line != t[i].line &&
          !(tok.kind == TokenKind::Delimiter && (tok.text == ")" || tok.text == "]"))) {
        return false;
      }
    }
    if (!closed) return false;
  }
  return true;
}

bool brackets_balanced(const TokenSequence& t) {
  std::string stack;
  for (const auto& tok : t) {
    if (tok.kind != TokenKind::Delimiter || tok.text.size() != 1) continue;
    const char c = tok.text[0];
    if (c == '(' || c == '[' || c == '{') {
      stack.push_back(c);
    } else if (c == ')' || c == ']' || c == '}') {
      const char want = c == ')' ? '(' : (c == ']' ? '[' : '{');
      if (stack.empty() || stack.back() != want) return false;
      stack.pop_back();
    }
  }
  return stack.empty();
}

std::optional<std::size_t> find_def(const TokenSequence& t, std::string_view name, std::size_t from = 0) {
  for (std::size_t i = from; i + 1 < t.size(); ++i) {
    if (is(t[i], TokenKind::Keyword, "def") && is(t[i + 1], TokenKind::Identifier, name)) return i;
  }
  return std::nullopt;
}

std::optional<std::set<std::string>> returned_set(const TokenSequence& t, std::size_t def_at) {
  std::size_t i = def_at + 2;
  while (i < t.size() && !is(t[i], TokenKind::Keyword, "return")) {
    if (is(t[i], TokenKind::Keyword, "def") || is(t[i], TokenKind::Keyword, "class")) return std::nullopt;
    ++i;
  }
  if (i + 1 >= t.size() || !is(t[i + 1], TokenKind::Delimiter, "{")) return std::nullopt;
  std::set<std::string> out;
  for (i += 2; i < t.size(); ++i) {
    if (is(t[i], TokenKind::Delimiter, "}")) return out;
    if (t[i].kind == TokenKind::String) {
      out.insert(unquote(t[i].text));
    } else if (!is(t[i], TokenKind::Delimiter, ",")) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

ValidityReport check_candidate_structure(std::string_view source) {
  TokenSequence t;
  try {
    t = tokenize(source);
  } catch (const OversizeInput& e) {
    return ValidityReport::failed_at(Stage::Parse, e.what());
  }
  if (t.empty()) return ValidityReport::failed_at(Stage::Parse, "empty source");
  for (const auto& tok : t) {
    if (tok.malformed) {
      return ValidityReport::failed_at(Stage::Parse, "line " + std::to_string(tok.line) +
                                                         ": unterminated literal or stray bytes");
    }
  }
  if (!brackets_balanced(t)) return ValidityReport::failed_at(Stage::Parse, "unbalanced brackets");
  if (!headers_well_formed(t)) return ValidityReport::failed_at(Stage::Parse, "malformed def/class header");

  std::optional<std::size_t> net;
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (is(t[i], TokenKind::Keyword, "class") && is(t[i + 1], TokenKind::Identifier, "Net")) {
      net = i;
      break;
    }
  }
  if (!net || !find_def(t, "__init__", *net)) {
    return ValidityReport::failed_at(Stage::Instantiate, "no class Net with __init__");
  }
  if (!find_def(t, "forward", *net)) return ValidityReport::failed_at(Stage::Forward, "Net has no forward");
  if (!find_def(t, "train_setup", *net)) return ValidityReport::failed_at(Stage::Contract, "Net has no train_setup");
  if (!find_def(t, "learn", *net)) return ValidityReport::failed_at(Stage::Contract, "Net has no learn");
  const auto hp = find_def(t, "supported_hyperparameters");
  if (!hp) return ValidityReport::failed_at(Stage::Contract, "no supported_hyperparameters()");
  const auto names = returned_set(t, *hp);
  if (!names || *names != std::set<std::string>{"lr", "momentum"}) {
    return ValidityReport::failed_at(Stage::Contract,
                                     "supported_hyperparameters() must return {'lr', 'momentum'}");
  }
  return ValidityReport::passed();
}

SimulatedEvaluator::SimulatedEvaluator(SimulatedEvaluatorConfig config) : config_(config) {}

ValidityReport SimulatedEvaluator::validate(std::string_view, std::string_view source) {
  return check_candidate_structure(source);
}

EvalResult SimulatedEvaluator::train_one_epoch(std::string_view, std::string_view source,
                                               const EvalContext& ctx) {
  SplitMix64 rng(hash_combine(fnv1a64(source), config_.seed));
  const double u1 = 1.0 - rng.uniform();  // (0, 1]
  const double u2 = rng.uniform();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  EvalResult r;
  r.accuracy = std::clamp(config_.mean_accuracy.at(ctx.generator_state) + config_.accuracy_sd * z, 0.0, 1.0);
  r.wall_time = 20.0 + 40.0 * rng.uniform();
  r.evaluator_id = id();
  return r;
}

}  // namespace archloop
