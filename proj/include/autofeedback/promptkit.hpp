#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "autofeedback/core_model.hpp"

namespace autofeedback::prompt {

enum class AgentKind { Agent1, Agent2 };

std::string_view to_string(AgentKind kind);

inline constexpr std::array<std::string_view, 8> kAgent1Sections = {
    "Role", "Task", "ITEM", "SCORING RUBRIC 1", "STUDENT RESPONSE", "TEACHING AND LEARNING CONTEXT",
    "3D LEARNING GOAL", "CRITERIA FOR THE FEEDBACK"};

inline constexpr std::array<std::string_view, 9> kAgent2Sections = {
    "Role", "Task", "ITEM", "SCORING RUBRIC 1", "STUDENT RESPONSE", "TEACHING AND LEARNING CONTEXT",
    "3D LEARNING GOAL", "FEEDBACK FROM AGENT1", "POSSIBLE PROBLEM OF FEEDBACK"};

struct SectionSpec {
  std::string tag;
  std::string header;  // the exact line that opens the section, "<<TAG>>" unless overridden
  bool extension = false;
};

/// A prompt template: a text body split into sections by header lines, with
/// `{{name}}` placeholders bound to data sources by a sidecar manifest.
///
/// Template files are UTF-8 text. The manifest (`<stem>.manifest.json` next to
/// the body) declares the agent, the section order, and for each placeholder
/// a source such as `context.question`, `response.text`, `feedback.text`,
/// `critique.text` or `context.extensions.<key>`.
class PromptTemplate {
 public:
  /// Parses and validates a template. Throws InputError on an unknown section
  /// tag, a duplicate section, out-of-order sections, or a placeholder
  /// without a mapping.
  static PromptTemplate parse(std::string_view body, std::string_view manifest_json);

  AgentKind name() const { return name_; }
  const std::string& role_block() const { return role_block_; }
  const std::string& task_block() const { return task_block_; }
  const std::vector<SectionSpec>& sections() const { return sections_; }
  std::vector<std::string> section_order() const;
  const std::map<std::string, std::string>& placeholder_map() const { return placeholders_; }
  /// SHA-256 over body and manifest.
  const std::string& digest() const { return digest_; }

  /// Data available to one assembly. Pointers are optional inputs.
  struct Inputs {
    const AssessmentContext& context;
    const StudentResponse& response;
    const FeedbackDocument* feedback = nullptr;
    const std::string* critique = nullptr;
  };
  std::string render(const Inputs& in) const;

 private:
  static PromptTemplate parse_checked(std::string_view body, std::string_view manifest_json);

  struct Segment {
    bool placeholder = false;
    std::string text;     // literal text, or placeholder name
    std::string section;  // section tag the segment lives in
  };

  AgentKind name_ = AgentKind::Agent1;
  std::string role_block_;
  std::string task_block_;
  std::vector<SectionSpec> sections_;
  std::map<std::string, std::string> placeholders_;
  std::vector<Segment> segments_;
  std::string digest_;
};

/// Loads `path` plus its sidecar manifest (same stem, `.manifest.json`).
PromptTemplate load_template(const std::filesystem::path& path);

std::string assemble_agent1(const AssessmentContext& ctx, const StudentResponse& resp, const PromptTemplate& tmpl);

/// Throws InputError when `agent1_feedback` is empty.
std::string assemble_agent2(const AssessmentContext& ctx, const StudentResponse& resp,
                            const FeedbackDocument& agent1_feedback, const PromptTemplate& tmpl);

/// Agent 1 regeneration that forwards Agent 2's critique (`critique.text`).
std::string assemble_agent1_with_critique(const AssessmentContext& ctx, const StudentResponse& resp,
                                          const std::string& critique, const PromptTemplate& tmpl);

/// Quotes untrusted text ("> " before every line) when it could be mistaken
/// for template structure; returns it unchanged otherwise.
std::string fence_untrusted(std::string_view value, const PromptTemplate& tmpl);

struct PromptSection {
  std::string tag;
  std::string body;  // surrounding blank lines removed
};

/// Splits an assembled prompt at the template's header lines.
std::vector<PromptSection> scan_sections(std::string_view prompt, const PromptTemplate& tmpl);

AssessmentContext context_from_json(const nlohmann::json& j);
nlohmann::json context_to_json(const AssessmentContext& ctx);
AssessmentContext load_context(const std::filesystem::path& path);

}  // namespace autofeedback::prompt
