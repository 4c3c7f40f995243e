#include <gtest/gtest.h>

#include <algorithm>
#include <regex>

#include "autofeedback/datasetio.hpp"
#include "autofeedback/error.hpp"
#include "autofeedback/orchestrator.hpp"
#include "autofeedback/synthetic_backend.hpp"
#include "test_support.hpp"

using namespace autofeedback;
using namespace autofeedback::pipeline;
using testsupport::FnBackend;
using testsupport::is_agent2_prompt;

namespace {

const std::string kFeedback =
    "**Aim of the Item:** Explain particle motion.\n\n**Your Performance:** You described heat.\n\n"
    "**Strength:** You linked heat to the water.\n\n**Area for improvement:** Describe particles.\n\n"
    "**Suggestions for further learning:** Try food coloring.";
const std::string kRevision =
    "**Aim of the Item:** Explain particle motion.\n\n**Your Performance:** You described heat.\n\n"
    "**Strength:** You wrote a sentence.\n\n**Area for improvement:** Describe particles.\n\n"
    "**Suggestions for further learning:** Try food coloring.";
const std::string kGoodEnough = "STEP 1: No problems.\nSTEP 2: The feedback now is good enough.";
const std::string kRevise = "STEP 1: It over-praised the student.\nSTEP 2: Revised feedback:\n" + kRevision;

RunConfig config_for(const testsupport::TempDir& dir, RunMode mode, const std::vector<StudentResponse>& rows) {
  data::save_corpus(data::Corpus(rows), dir / "data.csv", data::CorpusFormat::Csv);
  RunConfig cfg;
  cfg.mode = mode;
  cfg.dataset = dir / "data.csv";
  cfg.context = testsupport::data_dir() / "contexts/ms_ps1_4.json";
  cfg.agent1_template = testsupport::data_dir() / "templates/agent1.tmpl";
  cfg.agent2_template = testsupport::data_dir() / "templates/agent2.tmpl";
  cfg.loopback_template = testsupport::data_dir() / "templates/agent1_loopback.tmpl";
  cfg.output_dir = dir / "out";
  cfg.concurrency = 2;
  return cfg;
}

std::vector<StudentResponse> three_rows() {
  return {{"r-1", "the particles move faster when heated", ScoreLevel::Proficient},
          {"r-2", "the candy melts", ScoreLevel::Beginning},
          {"r-3", "the color goes away", ScoreLevel::Beginning}};
}

}  // namespace

TEST(Pipeline, SingleModeCallsAgent1OnlyAndKeepsItsFeedback) {
  testsupport::TempDir dir;
  FnBackend fn([](const std::string& p) {
    EXPECT_FALSE(is_agent2_prompt(p));
    return kFeedback;
  });
  testsupport::CountingBackend counting(fn);
  auto result = run(config_for(dir, RunMode::Single, three_rows()), counting);
  EXPECT_EQ(counting.calls(), 3);
  ASSERT_EQ(result.records.size(), 3u);
  for (const auto& r : result.records) {
    EXPECT_EQ(r.mode, RunMode::Single);
    EXPECT_FALSE(r.agent2_prompt);
    EXPECT_FALSE(r.agent2_raw);
    EXPECT_FALSE(r.verdict);
    EXPECT_EQ(r.final_feedback.raw_text(), kFeedback);
    ASSERT_EQ(r.token_usage.size(), 1u);
    EXPECT_EQ(r.token_usage[0].call, "agent1");
  }
  const std::string file = testsupport::read(dir / "out/records.jsonl");
  EXPECT_EQ(file.find("agent2_raw"), std::string::npos);
  EXPECT_EQ(file.find("\"verdict\""), std::string::npos);
}

TEST(Pipeline, MultiModeGoodEnoughKeepsAgent1Feedback) {
  testsupport::TempDir dir;
  FnBackend fn([](const std::string& p) { return is_agent2_prompt(p) ? kGoodEnough : kFeedback; });
  testsupport::CountingBackend counting(fn);
  auto result = run(config_for(dir, RunMode::Multi, three_rows()), counting);
  EXPECT_EQ(counting.calls(), 6);
  for (const auto& r : result.records) {
    ASSERT_TRUE(r.verdict);
    EXPECT_EQ(r.verdict->decision(), Decision::GoodEnough);
    EXPECT_EQ(r.final_feedback.raw_text(), kFeedback);
    EXPECT_EQ(r.agent2_raw, kGoodEnough);
    EXPECT_NE(r.agent2_prompt->find(kFeedback), std::string::npos);
    EXPECT_EQ(r.wall_time_ms, 6);
  }
}

TEST(Pipeline, MultiModeRevisionBecomesFinal) {
  testsupport::TempDir dir;
  FnBackend fn([](const std::string& p) { return is_agent2_prompt(p) ? kRevise : kFeedback; });
  auto result = run(config_for(dir, RunMode::Multi, three_rows()), fn);
  for (const auto& r : result.records) {
    EXPECT_EQ(r.verdict->decision(), Decision::Revised);
    EXPECT_EQ(r.verdict->detected_issues(), IssueSet{IssueKind::OverPraise});
    EXPECT_EQ(r.final_feedback.raw_text(), kRevision);
    EXPECT_EQ(r.agent1_feedback.raw_text(), kFeedback);
    EXPECT_FALSE(r.verdict->needs_review());
  }
}

TEST(Pipeline, UnstructuredAgent2OutputIsKeptForReview) {
  testsupport::TempDir dir;
  const std::string loose = "Tone down the praise a little.";
  FnBackend fn([&](const std::string& p) { return is_agent2_prompt(p) ? loose : kFeedback; });
  auto result = run(config_for(dir, RunMode::Multi, three_rows()), fn);
  ASSERT_EQ(result.manifest.failed, 0u);
  for (const auto& r : result.records) {
    EXPECT_TRUE(r.verdict->needs_review());
    EXPECT_EQ(r.final_feedback.raw_text(), loose);
  }
}

TEST(Pipeline, FailuresAreCollectedPerResponse) {
  testsupport::TempDir dir;
  FnBackend fn([](const std::string& p) -> std::string {
    if (p.find("the candy melts") != std::string::npos && !is_agent2_prompt(p)) {
      throw llm::BackendError(llm::BackendErrorKind::NonRetryable, 400, "HTTP 400: bad request");
    }
    if (p.find("the color goes away") != std::string::npos && !is_agent2_prompt(p)) return "";
    return is_agent2_prompt(p) ? kGoodEnough : kFeedback;
  });
  auto result = run(config_for(dir, RunMode::Multi, three_rows()), fn);
  EXPECT_EQ(result.manifest.inputs, 3u);
  EXPECT_EQ(result.manifest.succeeded, 1u);
  EXPECT_EQ(result.manifest.failed, 2u);
  ASSERT_EQ(result.manifest.failures.size(), 2u);
  EXPECT_EQ(result.manifest.failures[0].response_id, "r-2");
  EXPECT_EQ(result.manifest.failures[0].stage, "agent1");
  EXPECT_NE(result.manifest.failures[0].error.find("400"), std::string::npos);
  // Empty Agent 1 output cannot be validated.
  EXPECT_EQ(result.manifest.failures[1].response_id, "r-3");
  EXPECT_EQ(result.manifest.failures[1].stage, "agent2");
  auto manifest = nlohmann::json::parse(testsupport::read(dir / "out/manifest.json"));
  EXPECT_EQ(manifest["counts"]["failed"], 2);
  EXPECT_EQ(read_run_file(dir / "out").size(), 1u);
}

TEST(Pipeline, MissingTemplateFailsBeforeAnyCall) {
  testsupport::TempDir dir;
  FnBackend fn([](const std::string&) { return kFeedback; });
  testsupport::CountingBackend counting(fn);
  auto cfg = config_for(dir, RunMode::Multi, three_rows());
  cfg.agent2_template = dir / "nope.tmpl";
  EXPECT_THROW(run(cfg, counting), InputError);
  cfg = config_for(dir, RunMode::Multi, three_rows());
  cfg.max_validation_rounds = 2;
  cfg.loopback_template = dir / "nope.tmpl";
  EXPECT_THROW(run(cfg, counting), InputError);
  EXPECT_EQ(counting.calls(), 0);
  EXPECT_FALSE(std::filesystem::exists(dir / "out/records.jsonl"));
}

TEST(Pipeline, ConfigValidationRejectsBadLimits) {
  testsupport::TempDir dir;
  auto cfg = config_for(dir, RunMode::Single, three_rows());
  EXPECT_NO_THROW(cfg.validate());
  cfg.concurrency = 0;
  EXPECT_THROW(cfg.validate(), InputError);
  cfg.concurrency = 1;
  cfg.max_validation_rounds = 0;
  EXPECT_THROW(cfg.validate(), InputError);
}

TEST(Pipeline, OutputIsIndependentOfConcurrency) {
  testsupport::TempDir dir;
  llm::SyntheticBackend synthetic;
  auto cfg = config_for(dir, RunMode::Multi, three_rows());
  cfg.dataset = testsupport::fixtures_dir() / "sample/test.csv";
  cfg.concurrency = 1;
  cfg.output_dir = dir / "c1";
  run(cfg, synthetic);
  cfg.concurrency = 8;
  cfg.output_dir = dir / "c8";
  run(cfg, synthetic);
  const auto a = testsupport::read(dir / "c1/records.jsonl");
  EXPECT_EQ(a, testsupport::read(dir / "c8/records.jsonl"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 240);
}

TEST(Pipeline, RecordsRoundTripThroughJson) {
  const auto records = read_run_file(testsupport::fixtures_dir() / "runs/multi");
  ASSERT_EQ(records.size(), 240u);
  const std::string text = serialize_records(records);
  EXPECT_EQ(serialize_records(parse_records(text)), text);
  EXPECT_EQ(text, testsupport::read(testsupport::fixtures_dir() / "runs/multi/records.jsonl"));
  for (std::size_t i = 1; i < records.size(); ++i) EXPECT_LT(records[i - 1].response_id, records[i].response_id);
}

TEST(Pipeline, TamperedWordCountIsDetected) {
  auto j = nlohmann::json::parse(serialize_records({read_run_file(testsupport::fixtures_dir() / "runs/single").front()}));
  j["final_feedback"]["word_count"] = 1;
  EXPECT_THROW(record_from_json(j), IntegrityError);
}

TEST(Pipeline, ValidationRoundsLoopTheCritiqueBack) {
  testsupport::TempDir dir;
  std::vector<std::string> loopback_prompts;
  std::mutex mu;
  FnBackend fn([&](const std::string& p) {
    if (is_agent2_prompt(p)) return kRevise;
    if (p.find("<<REVIEW FROM AGENT2>>") != std::string::npos) {
      std::lock_guard lock(mu);
      loopback_prompts.push_back(p);
    }
    return kFeedback;
  });
  auto cfg = config_for(dir, RunMode::Multi, {three_rows().front()});
  cfg.max_validation_rounds = 3;
  auto result = run(cfg, fn);
  ASSERT_EQ(result.records.size(), 1u);
  const auto& r = result.records.front();
  EXPECT_EQ(r.earlier_rounds.size(), 2u);
  std::vector<std::string> calls;
  for (const auto& u : r.token_usage) calls.push_back(u.call);
  EXPECT_EQ(calls, (std::vector<std::string>{"agent1", "agent2", "agent1.round2", "agent2.round2", "agent1.round3",
                                             "agent2.round3"}));
  ASSERT_EQ(loopback_prompts.size(), 2u);
  EXPECT_NE(loopback_prompts[0].find("It over-praised the student."), std::string::npos);
  EXPECT_EQ(r.final_feedback.raw_text(), kRevision);
}

TEST(Pipeline, GoodEnoughStopsTheLoopEarly) {
  testsupport::TempDir dir;
  FnBackend fn([](const std::string& p) { return is_agent2_prompt(p) ? kGoodEnough : kFeedback; });
  testsupport::CountingBackend counting(fn);
  auto cfg = config_for(dir, RunMode::Multi, {three_rows().front()});
  cfg.max_validation_rounds = 3;
  auto result = run(cfg, counting);
  EXPECT_EQ(counting.calls(), 2);
  EXPECT_TRUE(result.records.front().earlier_rounds.empty());
}

TEST(Pipeline, SplitRoleSendsTheRoleBlockAsSystemMessage) {
  const auto tmpl = prompt::load_template(testsupport::data_dir() / "templates/agent1.tmpl");
  const std::string prompt = "Role:\nteacher\n\nTASK:\ndo it\n";
  auto joined = to_messages(prompt, tmpl, false);
  ASSERT_EQ(joined.size(), 1u);
  EXPECT_EQ(joined[0].content, prompt);
  auto split = to_messages(prompt, tmpl, true);
  ASSERT_EQ(split.size(), 2u);
  EXPECT_EQ(split[0].role, llm::Role::System);
  EXPECT_EQ(split[0].content, "Role:\nteacher");
  EXPECT_EQ(split[1].role, llm::Role::User);
  EXPECT_EQ(split[1].content, "TASK:\ndo it\n");
}

TEST(Pipeline, LongFeedbackIsFlaggedNotTruncated) {
  testsupport::TempDir dir;
  std::string longer = kFeedback;
  for (int i = 0; i < 300; ++i) longer += " more";
  FnBackend fn([&](const std::string&) { return longer; });
  auto result = run(config_for(dir, RunMode::Single, three_rows()), fn);
  for (const auto& r : result.records) {
    EXPECT_TRUE(r.over_word_limit);
    EXPECT_EQ(r.final_feedback.raw_text(), longer);
  }
}

TEST(Pipeline, FingerprintNamesModelAndParameterDigest) {
  const auto fp = backend_fingerprint("gpt-4o", 0.0, 1024, false);
  EXPECT_TRUE(std::regex_match(fp, std::regex("gpt-4o@[0-9a-f]{16}"))) << fp;
  EXPECT_EQ(fp, backend_fingerprint("gpt-4o", 0.0, 1024, false));
  EXPECT_NE(fp, backend_fingerprint("gpt-4o", 0.0, 1024, true));
  EXPECT_NE(fp, backend_fingerprint("gpt-4o", 0.2, 1024, false));
}
