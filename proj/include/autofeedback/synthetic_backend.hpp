#pragma once

#include <string>
#include <string_view>

#include "autofeedback/llm_client.hpp"

namespace autofeedback::llm {

/// Offline stand-in for a chat model, used to build the shipped fixtures and
/// for dry runs. Output is a pure function of the request: prompts carrying a
/// feedback-criteria section get five-part feedback, prompts carrying
/// Agent 1 feedback get a validation answer (sentinel, revision, or the
/// occasional unstructured reply). The text is synthetic and says nothing
/// about how a real model would behave.
class SyntheticBackend : public ChatBackend {
 public:
  ChatResponse complete(const ChatRequest& req) override;

  static std::string feedback_for(std::string_view prompt, std::uint64_t variant);
  static std::string validation_for(std::string_view prompt, std::uint64_t variant);
};

/// Block of `prompt` between the `<<tag>>` header line and the next `<<...>>`
/// header line, trimmed. Empty when the tag is absent.
std::string prompt_block(std::string_view prompt, std::string_view tag);

}  // namespace autofeedback::llm
