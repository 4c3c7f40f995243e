#include "autofeedback/core_model.hpp"

#include <algorithm>
#include <utility>

#include "autofeedback/error.hpp"
#include "autofeedback/text_util.hpp"

namespace autofeedback {

std::string_view to_string(ScoreLevel level) {
  return level == ScoreLevel::Proficient ? "Proficient" : "Beginning";
}

std::optional<ScoreLevel> parse_score_level(std::string_view text) {
  auto t = text::trim(text);
  if (text::iequals(t, "beginning")) return ScoreLevel::Beginning;
  if (text::iequals(t, "proficient")) return ScoreLevel::Proficient;
  return std::nullopt;
}

void AssessmentContext::validate() const {
  if (text::trim(problem_statement).empty()) throw InputError("context: problem_statement is empty");
  if (text::trim(question).empty()) throw InputError("context: question is empty");
  if (rubric_rules.empty()) throw InputError("context: at least one rubric rule is required");
  std::set<std::string> labels;
  for (const auto& rule : rubric_rules) {
    if (text::trim(rule.label).empty()) throw InputError("context: rubric rule with empty label");
    if (text::trim(rule.text).empty()) throw InputError("context: rubric rule '" + rule.label + "' has no text");
    if (!labels.insert(rule.label).second) throw InputError("context: duplicate rubric label '" + rule.label + "'");
  }
  for (const auto& goal : learning_goals) {
    if (text::trim(goal.label).empty() || text::trim(goal.text).empty()) {
      throw InputError("context: each of the three learning goals needs a label and text");
    }
  }
  for (const auto* group : {&proficiency_rule.any_of, &proficiency_rule.all_of}) {
    for (const auto& label : *group) {
      if (!labels.count(label)) throw InputError("context: proficiency rule names unknown rubric label '" + label + "'");
    }
  }
}

ScoreLevel classify_by_rubric(const AssessmentContext& ctx, const std::set<std::string>& rule_hits) {
  for (const auto& hit : rule_hits) {
    bool known = std::any_of(ctx.rubric_rules.begin(), ctx.rubric_rules.end(),
                             [&](const RubricRule& r) { return r.label == hit; });
    if (!known) throw InputError("unknown rubric rule label '" + hit + "'");
  }
  const auto& rule = ctx.proficiency_rule;
  bool any = rule.any_of.empty() ||
             std::any_of(rule.any_of.begin(), rule.any_of.end(), [&](const auto& l) { return rule_hits.count(l) > 0; });
  bool all = std::all_of(rule.all_of.begin(), rule.all_of.end(), [&](const auto& l) { return rule_hits.count(l) > 0; });
  return any && all ? ScoreLevel::Proficient : ScoreLevel::Beginning;
}

std::string_view to_string(FeedbackSection section) {
  switch (section) {
    case FeedbackSection::AimOfTheItem: return "Aim of the Item";
    case FeedbackSection::YourPerformance: return "Your Performance";
    case FeedbackSection::Strength: return "Strength";
    case FeedbackSection::AreaForImprovement: return "Area for improvement";
    case FeedbackSection::SuggestionsForFurtherLearning: return "Suggestions for further learning";
  }
  return "";
}

std::optional<FeedbackSection> parse_feedback_section(std::string_view name) {
  for (auto s : kAllFeedbackSections) {
    if (text::iequals(text::trim(name), to_string(s))) return s;
  }
  return std::nullopt;
}

namespace {

// Header spellings, longest first so plural forms win over their prefixes.
struct HeaderSpelling {
  std::string_view text;
  FeedbackSection section;
};
constexpr std::array<HeaderSpelling, 9> kSpellings = {{
    {"suggestions for further learning", FeedbackSection::SuggestionsForFurtherLearning},
    {"suggestion for further learning", FeedbackSection::SuggestionsForFurtherLearning},
    {"areas for improvement", FeedbackSection::AreaForImprovement},
    {"area for improvement", FeedbackSection::AreaForImprovement},
    {"your performance", FeedbackSection::YourPerformance},
    {"aim of the item", FeedbackSection::AimOfTheItem},
    {"strengths", FeedbackSection::Strength},
    {"strength", FeedbackSection::Strength},
    {"aim of item", FeedbackSection::AimOfTheItem},
}};

bool is_decoration(char c) { return c == '*' || c == '_' || c == '#' || c == ' ' || c == '\t'; }

}  // namespace

std::vector<SectionHeader> find_section_headers(std::string_view body) {
  std::vector<SectionHeader> headers;
  auto lines = text::split_lines(body);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::string_view line = lines[li].text;
    std::size_t pos = 0;
    // Leading decoration: markdown emphasis, headings, bullets, "1." numbering.
    while (pos < line.size()) {
      char c = line[pos];
      if (is_decoration(c) || c == '-' || c == '>') {
        ++pos;
      } else if (c >= '0' && c <= '9') {
        std::size_t q = pos;
        while (q < line.size() && line[q] >= '0' && line[q] <= '9') ++q;
        if (q < line.size() && (line[q] == '.' || line[q] == ')')) {
          pos = q + 1;
        } else {
          break;
        }
      } else {
        break;
      }
    }
    std::string_view rest = line.substr(pos);
    const HeaderSpelling* match = nullptr;
    for (const auto& sp : kSpellings) {
      if (text::istarts_with(rest, sp.text)) {
        match = &sp;
        break;
      }
    }
    if (match == nullptr) continue;
    std::size_t after = pos + match->text.size();
    std::size_t q = after;
    while (q < line.size() && is_decoration(line[q])) ++q;
    std::size_t body_begin = 0;
    if (q == line.size()) {
      body_begin = li + 1 < lines.size() ? lines[li + 1].offset : body.size();
    } else if (line[q] == ':') {
      ++q;
      while (q < line.size() && is_decoration(line[q])) ++q;
      body_begin = q == line.size() ? (li + 1 < lines.size() ? lines[li + 1].offset : body.size())
                                    : lines[li].offset + q;
    } else {
      continue;  // prose that merely starts with a section word
    }
    headers.push_back({match->section, lines[li].offset, body_begin});
  }
  return headers;
}

std::optional<FeedbackSections> extract_sections(std::string_view body) {
  auto headers = find_section_headers(body);
  if (headers.empty()) return std::nullopt;
  FeedbackSections sections;
  for (std::size_t i = 0; i < headers.size(); ++i) {
    std::size_t end = i + 1 < headers.size() ? headers[i + 1].line_begin : body.size();
    std::size_t begin = std::min(headers[i].body_begin, end);
    sections.try_emplace(headers[i].section, std::string(text::trim(body.substr(begin, end - begin))));
  }
  return sections;
}

FeedbackDocument::FeedbackDocument(std::string raw_text)
    : raw_text_(std::move(raw_text)),
      sections_(extract_sections(raw_text_)),
      word_count_(text::count_words(raw_text_)) {}

std::string_view to_string(IssueKind kind) {
  return kind == IssueKind::OverPraise ? "over_praise" : "over_inference";
}

std::optional<IssueKind> parse_issue_kind(std::string_view t) {
  if (t == "over_praise") return IssueKind::OverPraise;
  if (t == "over_inference") return IssueKind::OverInference;
  return std::nullopt;
}

std::string_view to_string(Decision decision) {
  return decision == Decision::GoodEnough ? "good_enough" : "revised";
}

std::optional<Decision> parse_decision(std::string_view t) {
  if (t == "good_enough") return Decision::GoodEnough;
  if (t == "revised") return Decision::Revised;
  return std::nullopt;
}

ValidationVerdict ValidationVerdict::good_enough(std::string reasons, IssueSet issues) {
  ValidationVerdict v;
  v.decision_ = Decision::GoodEnough;
  v.reasons_ = std::move(reasons);
  v.issues_ = std::move(issues);
  return v;
}

ValidationVerdict ValidationVerdict::revised(std::string reasons, IssueSet issues, FeedbackDocument revision,
                                             bool needs_review) {
  if (revision.empty()) throw InvariantError("a revised verdict needs non-empty revised feedback");
  ValidationVerdict v;
  v.decision_ = Decision::Revised;
  v.reasons_ = std::move(reasons);
  v.issues_ = std::move(issues);
  v.revised_ = std::move(revision);
  v.needs_review_ = needs_review;
  return v;
}

std::string_view to_string(RunMode mode) { return mode == RunMode::Multi ? "multi" : "single"; }

std::optional<RunMode> parse_run_mode(std::string_view t) {
  if (text::iequals(t, "single")) return RunMode::Single;
  if (text::iequals(t, "multi")) return RunMode::Multi;
  return std::nullopt;
}

void RunRecord::validate() const {
  auto fail = [&](const std::string& what) {
    throw InvariantError("run record '" + response_id + "': " + what);
  };
  if (response_id.empty()) fail("empty response id");
  if (mode == RunMode::Single) {
    if (agent2_prompt || agent2_raw || verdict) fail("single mode carries Agent 2 artifacts");
    if (!earlier_rounds.empty()) fail("single mode carries validation rounds");
    if (!(final_feedback == agent1_feedback)) fail("single mode final feedback differs from Agent 1 feedback");
  } else {
    if (!agent2_prompt || !agent2_raw || !verdict) fail("multi mode is missing Agent 2 artifacts");
    if (verdict->decision() == Decision::GoodEnough) {
      if (!(final_feedback == agent1_feedback)) fail("good-enough verdict but final feedback is not Agent 1's");
    } else {
      if (!verdict->revised_feedback() || !(final_feedback == *verdict->revised_feedback())) {
        fail("revised verdict but final feedback is not the revision");
      }
    }
  }
  if (over_word_limit != final_feedback.over_word_limit()) fail("word-limit annotation disagrees with final feedback");
}

}  // namespace autofeedback
