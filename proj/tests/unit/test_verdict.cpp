#include <gtest/gtest.h>

#include <random>

#include "autofeedback/error.hpp"
#include "autofeedback/verdict.hpp"
#include "test_support.hpp"

using namespace autofeedback;
using nlohmann::json;

namespace {

json load_cases() {
  return json::parse(testsupport::read(testsupport::test_dir() / "fixtures/verdict_cases.json"));
}

}  // namespace

TEST(VerdictCases, FixtureHasFiftyCases) { EXPECT_EQ(load_cases().size(), 50u); }

TEST(VerdictCases, EachCaseParsesAsLabelled) {
  for (const auto& c : load_cases()) {
    const std::string name = c.at("name");
    const std::string input = c.at("input");
    SCOPED_TRACE(name);
    if (c.value("error", false)) {
      EXPECT_THROW(parse_verdict(input), InputError);
      continue;
    }
    const auto v = parse_verdict(input);
    EXPECT_EQ(to_string(v.decision()), c.at("decision").get<std::string>());
    EXPECT_EQ(v.needs_review(), c.at("needs_review").get<bool>());
    IssueSet expected;
    for (const auto& i : c.at("issues")) expected.insert(*parse_issue_kind(i.get<std::string>()));
    EXPECT_EQ(v.detected_issues(), expected);
    if (v.decision() == Decision::Revised) {
      ASSERT_TRUE(v.revised_feedback());
      if (c.contains("revision_prefix")) {
        EXPECT_EQ(v.revised_feedback()->raw_text().rfind(c.at("revision_prefix").get<std::string>(), 0), 0u)
            << v.revised_feedback()->raw_text();
      }
      if (v.needs_review()) {
        EXPECT_EQ(v.revised_feedback()->raw_text(), input);
      }
    } else {
      EXPECT_FALSE(v.revised_feedback());
    }
  }
}

TEST(IssueKeywords, MatchStemVariantsOnly) {
  EXPECT_EQ(detect_issue_keywords("It over-praised the answer"), IssueSet{IssueKind::OverPraise});
  EXPECT_EQ(detect_issue_keywords("overpraising and over inference"),
            (IssueSet{IssueKind::OverPraise, IssueKind::OverInference}));
  EXPECT_EQ(detect_issue_keywords("OVER-INFERRED"), IssueSet{IssueKind::OverInference});
  EXPECT_TRUE(detect_issue_keywords("the praise is fine; nothing inferred").empty());
  EXPECT_TRUE(detect_issue_keywords("moreover-praised").empty());
}

TEST(VerdictFuzz, NeverThrowsOnNonEmptyInputAndKeepsInvariants) {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> pieces = {
      "STEP 1", "STEP 2", ":", " ", "\n", "**", "Aim of the Item", "Your Performance", "Strength",
      "Area for improvement", "Suggestions for further learning", "The feedback now is good enough", ".",
      "over-praised", "over inference", "revise", "\xE2\x80\x9C", "\xC3\xA9", "#", "- ", "x", "\t", "\r\n"};
  for (int iter = 0; iter < 10000; ++iter) {
    std::string s;
    const int n = 1 + static_cast<int>(rng() % 16);
    for (int i = 0; i < n; ++i) {
      if (rng() % 10 == 0) s += static_cast<char>(rng() % 256);
      else s += pieces[rng() % pieces.size()];
    }
    ValidationVerdict v = ValidationVerdict::good_enough("", {});
    ASSERT_NO_THROW(v = parse_verdict(s)) << s;
    if (v.decision() == Decision::Revised) {
      ASSERT_TRUE(v.revised_feedback()) << s;
      EXPECT_FALSE(v.revised_feedback()->raw_text().empty()) << s;
      EXPECT_NE(s.find(v.revised_feedback()->raw_text()), std::string::npos) << s;
      if (v.needs_review()) {
        EXPECT_EQ(v.revised_feedback()->raw_text(), s);
      }
    } else {
      EXPECT_FALSE(v.revised_feedback());
      EXPECT_FALSE(v.needs_review());
    }
    // Parsing is a pure function of the text.
    const auto again = parse_verdict(s);
    EXPECT_EQ(again.decision(), v.decision());
    EXPECT_EQ(again.detected_issues(), v.detected_issues());
  }
}

TEST(VerdictFuzz, OnlyTheEmptyStringThrows) {
  EXPECT_THROW(parse_verdict(""), InputError);
  EXPECT_NO_THROW(parse_verdict(" "));
  EXPECT_NO_THROW(parse_verdict("\n\n"));
}
