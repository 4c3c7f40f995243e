#include "autofeedback/verdict.hpp"

#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "autofeedback/error.hpp"
#include "autofeedback/text_util.hpp"

namespace autofeedback {

namespace {

// Lower-case ASCII alphanumerics with every other run of bytes collapsed to a
// single space; `origin` maps each normalized byte back into the raw text.
struct Normalized {
  std::string text;
  std::vector<std::size_t> origin;
};

Normalized normalize(std::string_view raw) {
  Normalized n;
  n.text.reserve(raw.size());
  n.origin.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto c = static_cast<unsigned char>(raw[i]);
    if (c < 0x80 && std::isalnum(c)) {
      n.text.push_back(static_cast<char>(std::tolower(c)));
      n.origin.push_back(i);
    } else if (!n.text.empty() && n.text.back() != ' ') {
      n.text.push_back(' ');
      n.origin.push_back(i);
    }
  }
  return n;
}

// Position of `phrase` in normalized text, starting on a word boundary.
std::optional<std::size_t> find_phrase(const Normalized& n, std::string_view phrase, bool require_end_boundary) {
  std::size_t pos = 0;
  while ((pos = n.text.find(phrase, pos)) != std::string::npos) {
    bool start_ok = pos == 0 || n.text[pos - 1] == ' ';
    std::size_t end = pos + phrase.size();
    bool end_ok = !require_end_boundary || end == n.text.size() || n.text[end] == ' ';
    if (start_ok && end_ok) return pos;
    ++pos;
  }
  return std::nullopt;
}

std::string trimmed(std::string_view s) { return std::string(text::trim(s)); }

}  // namespace

IssueSet detect_issue_keywords(std::string_view text) {
  IssueSet issues;
  auto n = normalize(text);
  if (find_phrase(n, "over prais", false) || find_phrase(n, "overprais", false)) issues.insert(IssueKind::OverPraise);
  if (find_phrase(n, "over infer", false) || find_phrase(n, "overinfer", false)) issues.insert(IssueKind::OverInference);
  return issues;
}

ValidationVerdict parse_verdict(std::string_view raw) {
  if (raw.empty()) throw InputError("Agent 2 output is empty");

  auto norm = normalize(raw);
  auto headers = find_section_headers(raw);

  std::optional<std::size_t> anchor;
  for (const auto& h : headers) {
    if (h.section == FeedbackSection::AimOfTheItem) {
      anchor = h.line_begin;
      break;
    }
  }
  if (!anchor) {
    if (auto step2 = find_phrase(norm, "step 2", true)) {
      std::size_t step2_raw = norm.origin[*step2];
      for (const auto& h : headers) {
        if (h.line_begin >= step2_raw) {
          anchor = h.line_begin;
          break;
        }
      }
    }
  }

  if (anchor) {
    std::string reasons = trimmed(raw.substr(0, *anchor));
    std::string revision(raw.substr(*anchor));
    while (!revision.empty() && text::unicode_space_at(revision, revision.size() - 1) == 1) revision.pop_back();
    IssueSet issues = detect_issue_keywords(reasons);
    return ValidationVerdict::revised(std::move(reasons), std::move(issues), FeedbackDocument(std::move(revision)));
  }

  if (auto sentinel = find_phrase(norm, kGoodEnoughSentinel, true)) {
    std::string reasons = trimmed(raw.substr(0, norm.origin[*sentinel]));
    IssueSet issues = detect_issue_keywords(reasons);
    return ValidationVerdict::good_enough(std::move(reasons), std::move(issues));
  }

  std::string reasons = trimmed(raw);
  IssueSet issues = detect_issue_keywords(reasons);
  return ValidationVerdict::revised(std::move(reasons), std::move(issues), FeedbackDocument(std::string(raw)),
                                    /*needs_review=*/true);
}

}  // namespace autofeedback
