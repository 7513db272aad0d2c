#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace archloop {

struct CorpusRecord;

enum class ChatVariant {
  DescriptionA,  // MNIST-style task description
  DescriptionB,  // CIFAR-10 task description (the loop's target task)
};

std::string_view to_string(ChatVariant v);
ChatVariant chat_variant_from_string(std::string_view s);

struct ChatPair {
  std::string system_message;
  std::string user_message;
  std::string assistant_code;
  ChatVariant variant = ChatVariant::DescriptionB;

  friend bool operator==(const ChatPair&, const ChatPair&) = default;
};

struct ChatPolicy {
  // Pairs emitted per generated record: 1 (DescriptionB) or 2 (both).
  int generated_pairs = 1;

  friend bool operator==(const ChatPolicy&, const ChatPolicy&) = default;
};

std::string_view system_preamble();
std::string_view user_description(ChatVariant v);

/// True when the code lexes to a `class <Name>` definition.
bool has_class_definition(std::string_view source);

/// Seed records yield both description variants, generated records yield
/// `policy.generated_pairs`. Throws ConversionError when the code has no
/// class definition.
std::vector<ChatPair> to_chat_pairs(const CorpusRecord& record, const ChatPolicy& policy = {});

}  // namespace archloop
