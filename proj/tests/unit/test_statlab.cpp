#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "autofeedback/error.hpp"
#include "autofeedback/statlab.hpp"

using namespace autofeedback;
using namespace autofeedback::stats;

namespace {

ContingencyTable2x2 table(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) { return {a, b, c, d}; }

// Issue yes/no for single (first row) and multi (second row) out of 240 each.
ContingencyTable2x2 published_style(std::int64_t single_yes, std::int64_t multi_yes) {
  return table(single_yes, 240 - single_yes, multi_yes, 240 - multi_yes);
}

// Oracle: sum over cells of (observed - expected)^2 / expected, in long double.
long double pearson_oracle(const ContingencyTable2x2& t) {
  const long double n = t.n();
  const long double obs[2][2] = {{(long double)t.a, (long double)t.b}, {(long double)t.c, (long double)t.d}};
  const long double rows[2] = {obs[0][0] + obs[0][1], obs[1][0] + obs[1][1]};
  const long double cols[2] = {obs[0][0] + obs[1][0], obs[0][1] + obs[1][1]};
  long double sum = 0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const long double e = rows[i] * cols[j] / n;
      sum += (obs[i][j] - e) * (obs[i][j] - e) / e;
    }
  }
  return sum;
}

// Oracle: P(Z^2 > x) = 2 * integral_{sqrt x}^{inf} phi(u) du, composite Simpson.
double tail_oracle(double x) {
  const double lo = std::sqrt(x), hi = lo + 40.0;
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  auto f = [](double u) { return std::exp(-0.5 * u * u); };
  double s = f(lo) + f(hi);
  for (int i = 1; i < steps; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return 2.0 * (s * h / 3.0) / std::sqrt(2.0 * M_PI);
}

// Right-tail values for one degree of freedom, computed offline at 30 digits.
const std::vector<std::pair<double, double>> kFrozenTail = {
    {0.1, 0.7518296340458492758},     {0.5, 0.4795001221869534623},     {1, 0.3173105078629141028},
    {2, 0.1572992070502851307},       {3, 0.08326451666355040185},      {4, 0.04550026389635841440},
    {5, 0.02534731867746826393},      {6, 0.01430587843542963953},      {7, 0.008150971593502700313},
    {8, 0.004677734981047265838},     {9, 0.002699796063260189053},     {10, 0.001565402258002549677},
    {11, 0.0009111188771537128870},   {12, 0.0005320055051392496993},   {13, 0.0003114909767673838843},
    {14, 0.0001828106329818350318},   {15, 0.0001075111767295005634},   {16, 6.334248366623984251e-5},
    {17, 3.737981840170153418e-5},    {18, 2.209049699858544137e-5},    {19, 1.307184536676299771e-5},
    {20, 7.744216431044083638e-6},    {21, 4.592833711753967369e-6},    {22, 2.726504656155497327e-6},
    {23, 1.620013982466470026e-6},    {24, 9.633570086430945884e-7},    {25, 5.733031437583878233e-7},
    {26, 3.414173577297527614e-7},    {27, 2.034554614544432081e-7},    {28, 1.213154508366072793e-7},
    {29, 7.237829871740007168e-8},    {30, 4.320463057827497295e-8},    {31, 2.580284304160425187e-8},
    {32, 1.541725790028001885e-8},    {33, 9.215887201256229556e-9},    {34, 5.511207251989958309e-9},
    {35, 3.297053268997286603e-9},    {36, 1.973175290075396281e-9},    {37, 1.181292464661072281e-9},
    {38, 7.074463098970698185e-10},   {39, 4.238055426079458128e-10},   {40, 2.539628589470864971e-10},
    {3.8415, 0.049998772071222272}};

}  // namespace

TEST(ChiSquare, PublishedTableStatistics) {
  EXPECT_EQ(format_statistic(chi_square(published_style(37, 3))), "31.527");
  EXPECT_EQ(format_statistic(chi_square(published_style(68, 17))), "37.185");
  EXPECT_EQ(format_statistic(chi_square(published_style(23, 2))), "18.609");
}

TEST(ChiSquare, MatchesTheCellwiseOracle) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    auto t = table(1 + rng() % 300, 1 + rng() % 300, 1 + rng() % 300, 1 + rng() % 300);
    const double expected = static_cast<double>(pearson_oracle(t));
    EXPECT_NEAR(chi_square(t), expected, 1e-9 * std::max(1.0, expected));
  }
}

TEST(ChiSquare, EqualRowsGiveZero) { EXPECT_EQ(chi_square(table(10, 90, 10, 90)), 0.0); }

TEST(ChiSquare, SymmetricUnderRowAndColumnSwapAndScalesWithN) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 500; ++i) {
    const auto t = table(1 + rng() % 100, 1 + rng() % 100, 1 + rng() % 100, 1 + rng() % 100);
    const double x = chi_square(t);
    EXPECT_NEAR(chi_square(table(t.c, t.d, t.a, t.b)), x, 1e-9 * std::max(1.0, x));
    EXPECT_NEAR(chi_square(table(t.b, t.a, t.d, t.c)), x, 1e-9 * std::max(1.0, x));
    EXPECT_NEAR(chi_square(table(t.a, t.c, t.b, t.d)), x, 1e-9 * std::max(1.0, x));
    EXPECT_NEAR(chi_square(table(3 * t.a, 3 * t.b, 3 * t.c, 3 * t.d)), 3 * x, 1e-9 * std::max(1.0, x));
    EXPECT_GE(x, 0.0);
  }
}

TEST(ChiSquare, RejectsDegenerateTables) {
  EXPECT_THROW(chi_square(table(0, 10, 0, 10)), InputError);
  EXPECT_THROW(chi_square(table(0, 0, 5, 5)), InputError);
  EXPECT_THROW(chi_square(table(-1, 10, 2, 10)), InputError);
}

TEST(PValue, MatchesFrozenHighPrecisionValues) {
  for (const auto& [x, p] : kFrozenTail) {
    EXPECT_NEAR(p_value(x), p, 1e-12 * p) << "x=" << x;
  }
  EXPECT_EQ(p_value(0.0), 1.0);
}

TEST(PValue, MatchesQuadratureOracle) {
  for (double x = 0.05; x <= 40.0; x += 0.37) EXPECT_NEAR(p_value(x), tail_oracle(x), 1e-9) << "x=" << x;
}

TEST(PValue, IsMonotoneDecreasing) {
  double prev = 1.0;
  for (double x = 0.01; x < 60.0; x += 0.01) {
    const double p = p_value(x);
    ASSERT_LE(p, prev) << x;
    prev = p;
  }
  EXPECT_THROW(p_value(-1.0), InputError);
  EXPECT_THROW(p_value(std::numeric_limits<double>::quiet_NaN()), InputError);
}

TEST(PValue, PublishedStatisticsAreFarBelowOneThousandth) {
  for (auto [s, m] : {std::pair{37, 3}, {68, 17}, {23, 2}}) {
    const double p = p_value(chi_square(published_style(s, m)));
    EXPECT_LT(p, 0.001);
    EXPECT_EQ(format_p(p), "0.000");
  }
  EXPECT_EQ(format_p(0.0495), "0.050");
  EXPECT_EQ(format_p(0.00049), "0.000");
}

TEST(Percent2, RoundsHalfUpFromExactCounts) {
  EXPECT_EQ(Percent2::of(37, 240).str(), "15.42");
  EXPECT_EQ(Percent2::of(68, 240).str(), "28.33");
  EXPECT_EQ(Percent2::of(23, 240).str(), "9.58");
  EXPECT_EQ(Percent2::of(3, 240).str(), "1.25");
  EXPECT_EQ(Percent2::of(17, 240).str(), "7.08");
  EXPECT_EQ(Percent2::of(2, 240).str(), "0.83");
  EXPECT_EQ(Percent2::of(1, 8).str(), "12.50");
  EXPECT_EQ(Percent2::of(1, 800).str(), "0.13");  // 0.125 rounds up
  EXPECT_EQ(Percent2::of(0, 5).str(), "0.00");
  EXPECT_EQ(Percent2::from_hundredths(-50).str(), "-0.50");
  EXPECT_EQ(round_ratio(-5, 2), -3);
  EXPECT_EQ(round_ratio(5, 2), 3);
}

TEST(Percent2, ParseInvertsStr) {
  for (std::int64_t h : {0, 1, 99, 100, 1542, -50, -1234, 10000}) {
    const auto p = Percent2::from_hundredths(h);
    EXPECT_EQ(Percent2::parse(p.str()), p);
  }
  EXPECT_THROW(Percent2::parse("15.4"), InputError);
  EXPECT_THROW(Percent2::parse("abc"), InputError);
  EXPECT_THROW(Percent2::parse(""), InputError);
}

TEST(Tally, CountsFlagsAndTheirConjunction) {
  std::vector<IssueObservation> labels = {{"a", true, false}, {"b", true, true}, {"c", false, true}, {"d", false, false}};
  auto r = tally(labels, 8);
  EXPECT_EQ(r.n, 8);
  EXPECT_EQ(r.over_praise.count, 2);
  EXPECT_EQ(r.over_inference.count, 2);
  EXPECT_EQ(r.both.count, 1);
  EXPECT_EQ(r.over_praise.percent.str(), "25.00");
  EXPECT_THROW(IssueRates::from_counts(0, 0, 0, 0), InputError);
  EXPECT_THROW(IssueRates::from_counts(10, 11, 0, 0), InputError);
  auto back = IssueRates::from_json(r.to_json());
  EXPECT_EQ(back.both.count, 1);
  EXPECT_EQ(back.over_praise.percent, r.over_praise.percent);
}

TEST(CompareRuns, DeltasComeFromCounts) {
  const auto single = IssueRates::from_counts(240, 37, 68, 23);
  const auto multi = IssueRates::from_counts(240, 3, 17, 2);
  const auto cmp = compare_runs(single, multi);
  EXPECT_EQ(cmp.dimensions[0].delta.str(), "14.17");
  EXPECT_EQ(cmp.dimensions[1].delta.str(), "21.25");
  EXPECT_EQ(cmp.dimensions[2].delta.str(), "8.75");
  EXPECT_EQ(cmp.dimensions[1].table.a, 68);
  EXPECT_EQ(cmp.dimensions[1].table.d, 223);
  for (const auto& d : cmp.dimensions) EXPECT_NEAR(d.p, p_value(d.statistic), 0.0);
  const auto back = Comparison::from_json(cmp.to_json());
  EXPECT_EQ(back.dimensions[0].statistic, cmp.dimensions[0].statistic);
  EXPECT_EQ(back.dimensions[2].delta, cmp.dimensions[2].delta);
}

TEST(CompareRuns, ZeroIssueColumnGivesNoDifference) {
  const auto none = IssueRates::from_counts(240, 0, 0, 0);
  const auto cmp = compare_runs(none, none);
  for (const auto& d : cmp.dimensions) {
    EXPECT_EQ(d.statistic, 0.0);
    EXPECT_EQ(d.p, 1.0);
    EXPECT_EQ(d.delta.str(), "0.00");
  }
}
