#include "archloop/chat.hpp"

#include "archloop/corpus.hpp"
#include "archloop/error.hpp"
#include "archloop/lexer.hpp"

namespace archloop {

namespace {

constexpr std::string_view kSystem =
    "You are an expert PyTorch neural architecture designer. You write compact, "
    "executable image classifiers that reach high validation accuracy after a single "
    "training epoch while staying within the stated parameter budget. Reply with code only.";

constexpr std::string_view kDescriptionA =
    "Task: image classification on MNIST (10 classes). Write one nn.Module named Net that maps "
    "an input batch of shape (N, 3, 32, 32) to 10 logits using standard convolution, pooling, "
    "normalization and activation layers, with at most 500,000 parameters. Import torch and "
    "torch.nn as nn. Provide Net.__init__, Net.forward, Net.train_setup, Net.learn and a "
    "function supported_hyperparameters() returning {'lr', 'momentum'}. Do not load data or "
    "write a training script.";

constexpr std::string_view kDescriptionB =
    "Task: image classification on CIFAR-10 (10 classes). Write one nn.Module named Net that "
    "maps an input batch of shape (N, 3, 32, 32) to 10 logits using standard convolution, "
    "pooling, normalization and activation layers, with at most 500,000 parameters and no "
    "pretrained weights. Import torch and torch.nn as nn. Provide Net.__init__, Net.forward, "
    "Net.train_setup, Net.learn and a function supported_hyperparameters() returning "
    "{'lr', 'momentum'}. Do not load data or write a training script.";

ChatPair make_pair(const CorpusRecord& record, ChatVariant v) {
  return ChatPair{std::string(kSystem), std::string(user_description(v)), record.source_code, v};
}

}  // namespace

std::string_view to_string(ChatVariant v) {
  return v == ChatVariant::DescriptionA ? "description-A" : "description-B";
}

ChatVariant chat_variant_from_string(std::string_view s) {
  if (s == "description-A") return ChatVariant::DescriptionA;
  if (s == "description-B") return ChatVariant::DescriptionB;
  throw CorpusIoError("unknown chat variant: " + std::string(s));
}

std::string_view system_preamble() { return kSystem; }

std::string_view user_description(ChatVariant v) {
  return v == ChatVariant::DescriptionA ? kDescriptionA : kDescriptionB;
}

bool has_class_definition(std::string_view source) {
  const TokenSequence tokens = tokenize(source);
  for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i].kind == TokenKind::Keyword && tokens[i].text == "class" &&
        tokens[i + 1].kind == TokenKind::Identifier) {
      return true;
    }
  }
  return false;
}

std::vector<ChatPair> to_chat_pairs(const CorpusRecord& record, const ChatPolicy& policy) {
  if (!has_class_definition(record.source_code)) {
    throw ConversionError("record " + record.id + " has no class definition");
  }
  if (record.origin == Origin::Seed || policy.generated_pairs >= 2) {
    return {make_pair(record, ChatVariant::DescriptionA), make_pair(record, ChatVariant::DescriptionB)};
  }
  return {make_pair(record, ChatVariant::DescriptionB)};
}

}  // namespace archloop
