#include <gtest/gtest.h>

#include <set>

#include "autofeedback/datasetio.hpp"
#include "autofeedback/error.hpp"
#include "test_support.hpp"

using namespace autofeedback;
using namespace autofeedback::data;

namespace {

Corpus fixture_corpus() { return load_corpus(testsupport::fixtures_dir() / "synthetic_corpus_845.csv"); }

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(CorpusCsv, HandlesQuotingAndNormalizesLabels) {
  const std::string csv =
      "id,text,score_level\r\n"
      "a,\"heat, then \"\"motion\"\"\",  proficient \r\n"
      "b,\"two\nlines\",BEGINNING\n";
  auto c = parse_corpus(csv, CorpusFormat::Csv, "t.csv");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.responses()[0].text, "heat, then \"motion\"");
  EXPECT_EQ(c.responses()[0].score_level, ScoreLevel::Proficient);
  EXPECT_EQ(c.responses()[1].text, "two\nlines");
  EXPECT_EQ(c.responses()[1].score_level, ScoreLevel::Beginning);
  EXPECT_EQ(c.count(ScoreLevel::Proficient), 1u);
}

TEST(CorpusCsv, ColumnOrderDoesNotMatter) {
  auto c = parse_corpus("score_level,id,text\nProficient,x,particles move\n", CorpusFormat::Csv);
  EXPECT_EQ(c.responses()[0].id, "x");
  EXPECT_EQ(c.responses()[0].text, "particles move");
}

TEST(CorpusCsv, ErrorsNameTheLine) {
  EXPECT_NE(error_of([] { parse_corpus("id,text,score_level\na,x,Proficient\nb,y,Advanced\n", CorpusFormat::Csv, "t.csv"); })
                .find("t.csv:3"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_corpus("id,text\na,x\n", CorpusFormat::Csv, "t.csv"); }).find("score_level"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_corpus("id,text,score_level\na,x,Proficient\na,y,Beginning\n", CorpusFormat::Csv, "t.csv"); })
                .find("duplicate id 'a'"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_corpus("id,text,score_level\na,\"open,Proficient\n", CorpusFormat::Csv, "t.csv"); })
                .find("t.csv:2"),
            std::string::npos);
  EXPECT_NE(error_of([] { parse_corpus("id,text,score_level\na,x\n", CorpusFormat::Csv, "t.csv"); }).find("t.csv:2"),
            std::string::npos);
  EXPECT_THROW(parse_corpus("", CorpusFormat::Csv), InputError);
}

TEST(CorpusJsonl, ParsesAndReportsBadLines) {
  const std::string jsonl =
      "{\"id\":\"a\",\"text\":\"heat\",\"score_level\":\"Beginning\"}\n\n"
      "{\"id\":\"b\",\"text\":\"fast particles\",\"score_level\":\"proficient\"}\n";
  auto c = parse_corpus(jsonl, CorpusFormat::Jsonl, "t.jsonl");
  EXPECT_EQ(c.size(), 2u);
  EXPECT_NE(error_of([] { parse_corpus("{\"id\":\"a\",\"text\":\"x\",\"score_level\":\"Beginning\"}\n[1]\n", CorpusFormat::Jsonl, "t.jsonl"); })
                .find("t.jsonl:2"),
            std::string::npos);
  EXPECT_THROW(parse_corpus("{\"id\":\"a\"}\n", CorpusFormat::Jsonl), InputError);
}

TEST(CorpusIo, SaveAndLoadPreserveTheDigest) {
  testsupport::TempDir dir;
  const Corpus c({{"a", "heat, \"quoted\"\nnext line", ScoreLevel::Proficient}, {"b", "plain", ScoreLevel::Beginning}});
  for (auto fmt : {CorpusFormat::Csv, CorpusFormat::Jsonl}) {
    const auto path = dir / (fmt == CorpusFormat::Csv ? "c.csv" : "c.jsonl");
    save_corpus(c, path, fmt);
    auto back = load_corpus(path);
    EXPECT_EQ(back.responses(), c.responses());
    EXPECT_EQ(back.digest(), c.digest());
  }
  EXPECT_FALSE(format_from_path("x.txt"));
  EXPECT_EQ(format_from_path("x.ndjson"), CorpusFormat::Jsonl);
}

TEST(CorpusDigest, CoversContentNotFormatting) {
  const Corpus a({{"a", "x", ScoreLevel::Proficient}});
  EXPECT_NE(a.digest(), Corpus({{"a", "y", ScoreLevel::Proficient}}).digest());
  EXPECT_NE(a.digest(), Corpus({{"a", "x", ScoreLevel::Beginning}}).digest());
  EXPECT_EQ(a.digest(), parse_corpus("id,text,score_level\na,x,PROFICIENT\n", CorpusFormat::Csv).digest());
}

TEST(Sampling, BoundedDrawStaysInRangeAndCoversIt) {
  std::mt19937_64 rng(1);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    auto v = bounded_draw(rng, 7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_THROW(bounded_draw(rng, 0), InputError);
}

TEST(Sampling, SampleIdsIsASortedDeterministicSubset) {
  std::vector<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.push_back("id" + std::to_string(i));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto a = sample_ids(ids, 10, seed);
    EXPECT_EQ(a, sample_ids(ids, 10, seed));
    EXPECT_EQ(a.size(), 10u);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), 10u);
    for (const auto& id : a) EXPECT_NE(std::find(ids.begin(), ids.end(), id), ids.end());
  }
  // Input order does not matter.
  auto reversed = ids;
  std::reverse(reversed.begin(), reversed.end());
  EXPECT_EQ(sample_ids(reversed, 10, 3), sample_ids(ids, 10, 3));
  EXPECT_THROW(sample_ids(ids, 51, 0), InputError);
}

TEST(Sampling, BalancedSampleOfTheFixtureCorpus) {
  const auto corpus = fixture_corpus();
  ASSERT_EQ(corpus.size(), 845u);
  const auto s = balanced_sample(corpus, 120, 7);
  EXPECT_EQ(s.size(), 240u);
  EXPECT_EQ(s.count(ScoreLevel::Proficient), 120u);
  EXPECT_EQ(s.count(ScoreLevel::Beginning), 120u);
  EXPECT_TRUE(std::is_sorted(s.responses().begin(), s.responses().end(),
                             [](const auto& a, const auto& b) { return a.id < b.id; }));
  EXPECT_EQ(s.digest(), balanced_sample(corpus, 120, 7).digest());
  EXPECT_NE(s.digest(), balanced_sample(corpus, 120, 8).digest());
}

TEST(Sampling, PilotIsDisjointFromTheTestSample) {
  const auto corpus = fixture_corpus();
  const auto pilot = balanced_sample(corpus, 15, 7);
  const auto rest = split_disjoint(corpus, pilot);
  EXPECT_EQ(rest.size(), 815u);
  const auto test = balanced_sample(rest, 120, 8);
  for (const auto& r : test.responses()) EXPECT_FALSE(pilot.contains(r.id)) << r.id;

  // The shipped fixture sample is exactly this draw.
  const auto shipped = load_corpus(testsupport::fixtures_dir() / "sample/test.csv");
  EXPECT_EQ(shipped.digest(), test.digest());
  EXPECT_EQ(load_corpus(testsupport::fixtures_dir() / "sample/pilot.csv").digest(), pilot.digest());

  EXPECT_THROW(split_disjoint(pilot, corpus), InputError);
}

TEST(Sampling, ShortfallNamesTheClass) {
  const auto corpus = fixture_corpus();
  const auto msg = error_of([&] { balanced_sample(corpus, 400, 7); });
  EXPECT_NE(msg.find("Proficient"), std::string::npos) << msg;
  EXPECT_EQ(balanced_sample(corpus, 0, 7).size(), 0u);
}
