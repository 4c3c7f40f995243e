#pragma once

// Shared domain types for the feedback pipeline. Nothing in here performs
// I/O or talks to a backend; every type is immutable once built.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace autofeedback {

enum class ScoreLevel { Beginning, Proficient };

std::string_view to_string(ScoreLevel level);
/// Case-insensitive, surrounding white space ignored.
std::optional<ScoreLevel> parse_score_level(std::string_view text);

struct StudentResponse {
  std::string id;
  std::string text;
  ScoreLevel score_level = ScoreLevel::Beginning;

  friend bool operator==(const StudentResponse&, const StudentResponse&) = default;
};

struct RubricRule {
  std::string label;  // e.g. "Rule 1"
  std::string text;
};

struct LearningGoal {
  std::string label;  // e.g. "Core Concept"
  std::string text;
};

/// Proficient iff at least one `any_of` rule and every `all_of` rule is hit.
struct ProficiencyRule {
  std::vector<std::string> any_of;
  std::vector<std::string> all_of;
};

struct AssessmentContext {
  std::string item_id;
  std::string problem_statement;
  std::string question;
  std::vector<RubricRule> rubric_rules;
  std::string proficiency_logic;  // verbatim rubric combination sentence
  ProficiencyRule proficiency_rule;
  std::string teaching_context;
  std::array<LearningGoal, 3> learning_goals;  // core concept, crosscutting, practice
  std::string feedback_criteria;               // Agent 1 only
  std::string possible_problems;               // Agent 2 only
  std::map<std::string, std::string> extensions;

  /// Throws InputError when an invariant does not hold.
  void validate() const;
};

/// Rubric combination check used to audit dataset labels against rule-hit
/// annotations. Throws InputError naming any label the item does not declare.
ScoreLevel classify_by_rubric(const AssessmentContext& ctx, const std::set<std::string>& rule_hits);

enum class FeedbackSection {
  AimOfTheItem,
  YourPerformance,
  Strength,
  AreaForImprovement,
  SuggestionsForFurtherLearning,
};

inline constexpr std::array<FeedbackSection, 5> kAllFeedbackSections = {
    FeedbackSection::AimOfTheItem, FeedbackSection::YourPerformance, FeedbackSection::Strength,
    FeedbackSection::AreaForImprovement, FeedbackSection::SuggestionsForFurtherLearning};

std::string_view to_string(FeedbackSection section);
std::optional<FeedbackSection> parse_feedback_section(std::string_view name);

/// A section header found in free text. Offsets are byte positions in the
/// scanned text; the body runs from `body_begin` to the next header.
struct SectionHeader {
  FeedbackSection section;
  std::size_t line_begin;
  std::size_t body_begin;
};

/// Lines that open a feedback section. Matching is case-insensitive and
/// tolerates markdown decoration ("**Strength:**", "### Strengths", "- Aim of
/// the item:").
std::vector<SectionHeader> find_section_headers(std::string_view text);

using FeedbackSections = std::map<FeedbackSection, std::string>;

/// Section bodies keyed by section, or nullopt when no header is present.
/// The first occurrence of a repeated header wins. Every body is a substring
/// of `text`.
std::optional<FeedbackSections> extract_sections(std::string_view text);

inline constexpr std::size_t kFeedbackWordLimit = 300;

class FeedbackDocument {
 public:
  FeedbackDocument() = default;
  explicit FeedbackDocument(std::string raw_text);

  const std::string& raw_text() const { return raw_text_; }
  const std::optional<FeedbackSections>& sections() const { return sections_; }
  std::size_t word_count() const { return word_count_; }
  bool empty() const { return raw_text_.empty(); }
  bool over_word_limit() const { return word_count_ > kFeedbackWordLimit; }

  friend bool operator==(const FeedbackDocument& a, const FeedbackDocument& b) {
    return a.raw_text_ == b.raw_text_;
  }

 private:
  std::string raw_text_;
  std::optional<FeedbackSections> sections_;
  std::size_t word_count_ = 0;
};

enum class IssueKind { OverPraise, OverInference };
using IssueSet = std::set<IssueKind>;

std::string_view to_string(IssueKind kind);
std::optional<IssueKind> parse_issue_kind(std::string_view text);

enum class Decision { GoodEnough, Revised };

std::string_view to_string(Decision decision);
std::optional<Decision> parse_decision(std::string_view text);

/// Agent 2's outcome. A Revised verdict always carries non-empty revised
/// feedback; a GoodEnough verdict never carries any.
class ValidationVerdict {
 public:
  static ValidationVerdict good_enough(std::string reasons, IssueSet issues);
  /// `needs_review` marks a revision whose structure could not be recognized
  /// (the whole Agent 2 output was kept as the revision).
  static ValidationVerdict revised(std::string reasons, IssueSet issues, FeedbackDocument revision,
                                   bool needs_review = false);

  Decision decision() const { return decision_; }
  const std::string& reasons() const { return reasons_; }
  const IssueSet& detected_issues() const { return issues_; }
  const std::optional<FeedbackDocument>& revised_feedback() const { return revised_; }
  bool needs_review() const { return needs_review_; }

 private:
  ValidationVerdict() = default;

  Decision decision_ = Decision::GoodEnough;
  std::string reasons_;
  IssueSet issues_;
  std::optional<FeedbackDocument> revised_;
  bool needs_review_ = false;
};

enum class RunMode { Single, Multi };

std::string_view to_string(RunMode mode);
std::optional<RunMode> parse_run_mode(std::string_view text);

struct CallUsage {
  std::string call;  // "agent1", "agent2", "agent1.round2", ...
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

/// A superseded generate/validate round when critiques are looped back.
struct EarlierRound {
  std::string agent1_raw;
  std::string agent2_raw;
};

struct RunRecord {
  std::string response_id;
  RunMode mode = RunMode::Single;
  std::string response_text;
  ScoreLevel score_level = ScoreLevel::Beginning;
  std::string agent1_prompt;
  FeedbackDocument agent1_feedback;
  std::optional<std::string> agent2_prompt;
  std::optional<std::string> agent2_raw;
  std::optional<ValidationVerdict> verdict;
  FeedbackDocument final_feedback;
  bool over_word_limit = false;
  std::vector<CallUsage> token_usage;
  std::int64_t wall_time_ms = 0;
  std::string backend_fingerprint;
  std::vector<EarlierRound> earlier_rounds;

  /// Throws InvariantError when mode/field co-occurrence rules are broken.
  void validate() const;
};

}  // namespace autofeedback
