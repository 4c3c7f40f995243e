#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace autofeedback::stats {

/// A percentage held exactly as signed hundredths of a percent point.
class Percent2 {
 public:
  constexpr Percent2() = default;
  static constexpr Percent2 from_hundredths(std::int64_t h) { return Percent2(h); }
  /// 100 * count / n rounded half-up (half away from zero) to 2 decimals.
  static Percent2 of(std::int64_t count, std::int64_t n);

  constexpr std::int64_t hundredths() const { return hundredths_; }
  double value() const { return static_cast<double>(hundredths_) / 100.0; }
  /// "15.42", "-0.50", "0.00"
  std::string str() const;
  /// Inverse of str(); throws InputError on anything else.
  static Percent2 parse(std::string_view text);

  friend constexpr bool operator==(Percent2, Percent2) = default;

 private:
  constexpr explicit Percent2(std::int64_t h) : hundredths_(h) {}
  std::int64_t hundredths_ = 0;
};

/// round(num / den) with halves away from zero; den > 0.
std::int64_t round_ratio(std::int64_t num, std::int64_t den);

/// One coded feedback item.
struct IssueObservation {
  std::string record_id;
  bool over_praise = false;
  bool over_inference = false;
};

struct CountPercent {
  std::int64_t count = 0;
  Percent2 percent;
};

/// Issue counts over n feedback items; percents always derive from counts.
struct IssueRates {
  std::int64_t n = 0;
  CountPercent over_praise;
  CountPercent over_inference;
  CountPercent both;

  /// Throws InputError when n <= 0 or a count is outside [0, n].
  static IssueRates from_counts(std::int64_t n, std::int64_t over_praise, std::int64_t over_inference,
                                std::int64_t both);
  nlohmann::json to_json() const;
  static IssueRates from_json(const nlohmann::json& j);
};

/// Counts true flags in `labels` over a run of size `n`; items without a
/// label count as issue-free.
IssueRates tally(std::span<const IssueObservation> labels, std::int64_t n);

/// Rows: single agent, multi-agent. Columns: issue yes, issue no.
struct ContingencyTable2x2 {
  std::int64_t a = 0, b = 0, c = 0, d = 0;
  std::int64_t n() const { return a + b + c + d; }
};

/// Pearson statistic, no continuity correction:
/// n(ad - bc)^2 / ((a+b)(c+d)(a+c)(b+d)). Throws InputError when a cell is
/// negative or any row/column total is zero.
double chi_square(const ContingencyTable2x2& t);

/// Right tail of the chi-square distribution with one degree of freedom,
/// erfc(sqrt(x/2)). Throws InputError for negative or NaN input.
double p_value(double statistic);

/// Half-away-from-zero rounding to `decimals` places.
double round_to(double x, int decimals);
/// Fixed 3-decimal form of a statistic.
std::string format_statistic(double statistic);
/// Fixed 3-decimal form; anything below 0.0005 prints as "0.000".
std::string format_p(double p);

enum class IssueDimension { OverPraise, OverInference, Both };
inline constexpr std::array<IssueDimension, 3> kAllDimensions = {IssueDimension::OverPraise,
                                                                  IssueDimension::OverInference, IssueDimension::Both};
std::string_view to_string(IssueDimension dim);
const CountPercent& select(const IssueRates& rates, IssueDimension dim);

struct DimensionResult {
  IssueDimension dimension = IssueDimension::OverPraise;
  ContingencyTable2x2 table;
  double statistic = 0.0;
  double p = 1.0;
  Percent2 delta;  // single percent - multi percent, from counts
};

struct Comparison {
  IssueRates single;
  IssueRates multi;
  std::array<DimensionResult, 3> dimensions;

  nlohmann::json to_json() const;
  static Comparison from_json(const nlohmann::json& j);
};

/// Builds the three 2x2 tables, statistics, p-values and percentage-point deltas.
/// A dimension with a zero issue column (0% or 100% in both runs) gets
/// statistic 0 and p 1.
Comparison compare_runs(const IssueRates& single, const IssueRates& multi);

}  // namespace autofeedback::stats
