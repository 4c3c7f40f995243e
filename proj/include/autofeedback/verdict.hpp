#pragma once

#include <string_view>

#include "autofeedback/core_model.hpp"

namespace autofeedback {

inline constexpr std::string_view kGoodEnoughSentinel = "the feedback now is good enough";

/// Interprets Agent 2's raw output.
///
/// A revision is recognized at the first "Aim of the Item" header (any
/// decoration), or failing that at the first feedback-section header after a
/// "STEP 2" marker; everything before it is the reasons segment. Without a
/// revision, the sentinel phrase (case and punctuation ignored) means the
/// feedback is good enough. Anything else is kept whole as a revision flagged
/// for human review. Issue flags come from "over-prais"/"over-infer" stems in
/// the reasons segment.
///
/// Throws InputError only for an empty string.
ValidationVerdict parse_verdict(std::string_view agent2_raw);

/// Issue stems found in `text` ("over praise", "over-inferred", "overpraising", ...).
IssueSet detect_issue_keywords(std::string_view text);

}  // namespace autofeedback
