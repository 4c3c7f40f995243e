#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "autofeedback/annotator.hpp"
#include "autofeedback/error.hpp"
#include "autofeedback/orchestrator.hpp"
#include "test_support.hpp"

using namespace autofeedback;
using namespace autofeedback::annotate;

namespace {

std::filesystem::path labels_dir() { return testsupport::fixtures_dir() / "labels"; }
std::filesystem::path multi_run() { return testsupport::fixtures_dir() / "runs/multi"; }

std::vector<RunRecord> first_records(std::size_t n) {
  auto all = pipeline::read_run_file(multi_run());
  all.resize(n);
  return all;
}

SessionOptions options_in(const testsupport::TempDir& dir, const std::string& rater = "rater-x") {
  SessionOptions o;
  o.run_file = multi_run();
  o.label_file = dir / "labels.jsonl";
  o.rater_id = rater;
  o.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
  return o;
}

AnnotationLabel label(const std::string& id, bool op, bool oi, const std::string& rater = "r") {
  return {id, rater, op, oi, "", "", ""};
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Oracle: Cohen's kappa from the 2x2 agreement table of two raters.
double kappa_oracle(const std::vector<bool>& x, const std::vector<bool>& y) {
  double n = static_cast<double>(x.size()), agree = 0, x1 = 0, y1 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    agree += x[i] == y[i];
    x1 += x[i];
    y1 += y[i];
  }
  const double po = agree / n;
  const double pe = (x1 / n) * (y1 / n) + (1 - x1 / n) * (1 - y1 / n);
  return (po - pe) / (1 - pe);
}

}  // namespace

TEST(AnnotationSession, ScriptedAnswersAreStored) {
  testsupport::TempDir dir;
  const auto records = first_records(3);
  std::istringstream in("y\nn\nfirst note\nmaybe\nn\ny\n\nN\nYES\n\n");
  std::ostringstream out;
  auto result = run_session(records, options_in(dir), in, out);
  EXPECT_EQ(result.presented, 3u);
  EXPECT_EQ(result.labeled, 3u);
  EXPECT_TRUE(result.complete);
  EXPECT_NE(out.str().find("Please answer y or n."), std::string::npos);
  EXPECT_NE(out.str().find("Over-praise? [y/n]: "), std::string::npos);
  EXPECT_NE(out.str().find("Note (Enter to skip): "), std::string::npos);

  auto file = read_label_file(dir / "labels.jsonl");
  EXPECT_TRUE(file.complete());
  ASSERT_EQ(file.labels.size(), 3u);
  EXPECT_TRUE(file.labels[0].over_praise);
  EXPECT_FALSE(file.labels[0].over_inference);
  EXPECT_EQ(file.labels[0].note, "first note");
  EXPECT_FALSE(file.labels[1].over_praise);
  EXPECT_TRUE(file.labels[1].over_inference);
  EXPECT_FALSE(file.labels[2].over_praise);
  EXPECT_TRUE(file.labels[2].over_inference);
  EXPECT_EQ(file.labels[2].timestamp, "2026-01-01T00:00:00Z");
  EXPECT_EQ(file.header.rater_id, "rater-x");
}

TEST(AnnotationSession, InterruptedSessionResumes) {
  testsupport::TempDir dir;
  const auto records = first_records(3);
  std::istringstream first("n\nn\n\ny\n");  // stops inside the second card
  std::ostringstream out;
  auto r1 = run_session(records, options_in(dir), first, out);
  EXPECT_EQ(r1.labeled, 1u);
  EXPECT_FALSE(r1.complete);

  std::istringstream second("y\ny\n\nn\nn\n\n");
  std::ostringstream out2;
  auto r2 = run_session(records, options_in(dir), second, out2);
  EXPECT_EQ(r2.presented, 2u);
  EXPECT_TRUE(r2.complete);
  EXPECT_EQ(out2.str().find("Record: " + records[0].response_id), std::string::npos);
  auto file = read_label_file(dir / "labels.jsonl");
  EXPECT_TRUE(file.find(records[1].response_id)->over_praise);
}

TEST(AnnotationSession, CompleteFileNeedsAmend) {
  testsupport::TempDir dir;
  const auto records = first_records(2);
  std::istringstream in("n\nn\n\nn\nn\n\n");
  std::ostringstream out;
  run_session(records, options_in(dir), in, out);

  std::istringstream again("y\ny\n\n");
  try {
    run_session(records, options_in(dir), again, out);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("--amend"), std::string::npos);
  }

  auto amend = options_in(dir);
  amend.amend = true;
  std::istringstream change("y\ny\nchanged\n");  // revise the first record, then stop
  run_session(records, amend, change, out);
  auto file = read_label_file(dir / "labels.jsonl");
  EXPECT_TRUE(file.complete());
  EXPECT_TRUE(file.find(records[0].response_id)->over_praise);
  EXPECT_EQ(file.find(records[0].response_id)->note, "changed");
  EXPECT_FALSE(file.find(records[1].response_id)->over_praise);
}

TEST(AnnotationSession, ForeignLabelFileIsRefused) {
  testsupport::TempDir dir;
  const auto records = first_records(2);
  std::istringstream in("n\nn\n\n");
  std::ostringstream out;
  run_session(records, options_in(dir, "rater-x"), in, out);
  std::istringstream in2("n\nn\n\n");
  EXPECT_THROW(run_session(records, options_in(dir, "rater-y"), in2, out), InputError);
}

TEST(AnnotationSession, SubsetsAreChecked) {
  testsupport::TempDir dir;
  const auto records = first_records(5);
  auto opt = options_in(dir);
  opt.subset = std::vector<std::string>{records[1].response_id, "ghost-1"};
  std::istringstream in;
  std::ostringstream out;
  try {
    run_session(records, opt, in, out);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost-1"), std::string::npos);
  }

  opt.subset = std::vector<std::string>{};
  auto result = run_session(records, opt, in, out);
  EXPECT_EQ(result.total, 0u);
  EXPECT_EQ(result.presented, 0u);
  EXPECT_TRUE(result.complete);
}

TEST(BlindCards, NeverRevealTheSystem) {
  for (const char* mode : {"single", "multi"}) {
    for (const auto& r : pipeline::read_run_file(testsupport::fixtures_dir() / "runs" / mode)) {
      const auto card = lower(render_card(r, 1, 240, true));
      ASSERT_EQ(card.find("single"), std::string::npos) << r.response_id;
      ASSERT_EQ(card.find("multi"), std::string::npos) << r.response_id;
      ASSERT_EQ(card.find("agent"), std::string::npos) << r.response_id;
    }
  }
  const auto r = pipeline::read_run_file(multi_run()).front();
  EXPECT_NE(render_card(r, 1, 1, false).find("System: multi-agent"), std::string::npos);
}

TEST(Agreement, PercentAndDisagreements) {
  std::vector<AnnotationLabel> a = {label("1", true, false), label("2", false, false), label("3", true, true),
                                    label("4", false, true)};
  std::vector<AnnotationLabel> b = {label("1", true, false), label("2", true, false), label("3", true, true),
                                    label("4", false, true)};
  auto g = agreement(a, b);
  EXPECT_EQ(g.total, 4u);
  EXPECT_EQ(g.overall.percent.str(), "75.00");
  EXPECT_EQ(g.over_praise.matches, 3u);
  EXPECT_EQ(g.over_inference.percent.str(), "100.00");
  EXPECT_EQ(g.disagreements, std::vector<std::string>{"2"});
  ASSERT_TRUE(g.over_praise.kappa);
  EXPECT_NEAR(*g.over_praise.kappa, kappa_oracle({true, false, true, false}, {true, true, true, false}), 1e-12);
}

TEST(Agreement, IsSymmetricAndReflexive) {
  const auto a = read_label_file(labels_dir() / "multi_overlap_rater_a.jsonl").labels;
  const auto b = read_label_file(labels_dir() / "multi_overlap_rater_b.jsonl").labels;
  const auto ab = agreement(a, b), ba = agreement(b, a), aa = agreement(a, a);
  EXPECT_EQ(ab.to_json(), ba.to_json());
  EXPECT_EQ(aa.overall.percent.str(), "100.00");
  EXPECT_TRUE(aa.disagreements.empty());
  EXPECT_EQ(ab.total, 72u);
  EXPECT_EQ(ab.overall.matches, 71u);
  EXPECT_EQ(ab.overall.percent.str(), "98.61");
  EXPECT_EQ(ab.disagreements, std::vector<std::string>{"syn-0439"});
  EXPECT_EQ(agreement({}, {}).overall.percent.str(), "100.00");
}

TEST(Agreement, CoverageMismatchListsTheDifference) {
  try {
    agreement({label("1", false, false), label("2", false, false)}, {label("2", false, false), label("3", false, false)});
    FAIL();
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1"), std::string::npos);
    EXPECT_NE(msg.find("3"), std::string::npos);
  }
}

TEST(Resolve, AppliesDecisionsToDisagreementsOnly) {
  const auto a = read_label_file(labels_dir() / "multi_overlap_rater_a.jsonl").labels;
  const auto b = read_label_file(labels_dir() / "multi_overlap_rater_b.jsonl").labels;
  const auto decisions = read_decisions(labels_dir() / "multi_overlap_decisions.jsonl");
  auto merged = resolve(a, b, decisions);
  ASSERT_EQ(merged.size(), 72u);
  std::size_t adjudicated = 0;
  for (const auto& l : merged) {
    EXPECT_EQ(l.rater_id, "consensus");
    if (l.provenance == "adjudicated") {
      ++adjudicated;
      EXPECT_EQ(l.record_id, "syn-0439");
    } else {
      EXPECT_EQ(l.provenance, "agreed");
    }
  }
  EXPECT_EQ(adjudicated, 1u);
  // The resolved set equals rater A, who was right about the planted case.
  EXPECT_EQ(agreement(merged, a).overall.percent.str(), "100.00");

  EXPECT_THROW(resolve(a, b, {}), InputError);
  auto extra = decisions;
  extra.push_back({a.front().record_id, false, false, ""});
  EXPECT_THROW(resolve(a, b, extra), InputError);
  auto dup = decisions;
  dup.push_back(decisions.front());
  EXPECT_THROW(resolve(a, b, dup), InputError);
}

TEST(Resolve, MergeWithRemainderCoversTheRun) {
  const auto a = read_label_file(labels_dir() / "multi_overlap_rater_a.jsonl").labels;
  const auto b = read_label_file(labels_dir() / "multi_overlap_rater_b.jsonl").labels;
  const auto rest = read_label_file(labels_dir() / "multi_remainder_rater_a.jsonl").labels;
  EXPECT_EQ(rest.size(), 168u);
  auto merged = merge_with_remainder(resolve(a, b, read_decisions(labels_dir() / "multi_overlap_decisions.jsonl")), rest);
  ASSERT_EQ(merged.size(), 240u);
  std::set<std::string> ids;
  for (const auto& l : merged) ids.insert(l.record_id);
  EXPECT_EQ(ids.size(), 240u);
  EXPECT_TRUE(std::is_sorted(merged.begin(), merged.end(),
                             [](const auto& x, const auto& y) { return x.record_id < y.record_id; }));
  std::size_t single_rater = 0;
  for (const auto& l : merged) single_rater += l.provenance == "single-rater";
  EXPECT_EQ(single_rater, 168u);
  // Same flags as the consolidated fixture.
  const auto consensus = read_label_file(labels_dir() / "multi_consensus.jsonl").labels;
  EXPECT_EQ(agreement(merged, consensus).overall.percent.str(), "100.00");
}

TEST(Overlap, SelectsThirtyPercentDeterministically) {
  const auto records = pipeline::read_run_file(multi_run());
  std::vector<std::string> ids;
  for (const auto& r : records) ids.push_back(r.response_id);
  const auto overlap = select_overlap(ids, 0.30, 7);
  EXPECT_EQ(overlap.size(), 72u);
  EXPECT_EQ(overlap, select_overlap(ids, 0.30, 7));
  EXPECT_EQ(overlap, read_label_file(labels_dir() / "multi_overlap_rater_a.jsonl").header.record_ids);
  EXPECT_EQ(select_overlap(ids, 0.0, 7).size(), 0u);
  EXPECT_EQ(select_overlap(ids, 1.0, 7).size(), 240u);
}

TEST(LabelFiles, LaterLinesOverrideAndForeignIdsAreRejected) {
  testsupport::TempDir dir;
  LabelFileHeader h;
  h.rater_id = "r";
  h.record_ids = {"a", "b"};
  write_label_file(dir / "l.jsonl", h, {label("a", false, false), label("a", true, false)});
  auto f = read_label_file(dir / "l.jsonl");
  EXPECT_EQ(f.labels.size(), 1u);
  EXPECT_TRUE(f.find("a")->over_praise);
  EXPECT_FALSE(f.complete());
  write_label_file(dir / "bad.jsonl", h, {label("z", false, false)});
  EXPECT_THROW(read_label_file(dir / "bad.jsonl"), InputError);
  EXPECT_THROW(to_observations({label("a", false, false), label("a", true, false)}), InputError);
}
