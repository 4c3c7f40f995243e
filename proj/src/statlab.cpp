#include "autofeedback/statlab.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

#include "autofeedback/error.hpp"

namespace autofeedback::stats {

using nlohmann::json;

std::int64_t round_ratio(std::int64_t num, std::int64_t den) {
  if (den <= 0) throw InputError("round_ratio: denominator must be positive");
  const bool negative = num < 0;
  const std::int64_t mag = negative ? -num : num;
  const std::int64_t q = (2 * mag + den) / (2 * den);
  return negative ? -q : q;
}

Percent2 Percent2::of(std::int64_t count, std::int64_t n) {
  if (n <= 0) throw InputError("percent of an empty total");
  return Percent2(round_ratio(count * 10000, n));
}

std::string Percent2::str() const {
  std::int64_t mag = hundredths_ < 0 ? -hundredths_ : hundredths_;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", hundredths_ < 0 ? "-" : "", static_cast<long long>(mag / 100),
                static_cast<long long>(mag % 100));
  return buf;
}

Percent2 Percent2::parse(std::string_view t) {
  std::string s(t);
  bool negative = !s.empty() && s[0] == '-';
  if (negative) s.erase(0, 1);
  auto dot = s.find('.');
  if (s.empty() || dot == std::string::npos || s.size() - dot - 1 != 2 || dot == 0) {
    throw InputError("not a two-decimal percent: '" + std::string(t) + "'");
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != dot && (s[i] < '0' || s[i] > '9')) throw InputError("not a two-decimal percent: '" + std::string(t) + "'");
  }
  std::int64_t h = std::stoll(s.substr(0, dot)) * 100 + std::stoll(s.substr(dot + 1));
  return Percent2(negative ? -h : h);
}

IssueRates IssueRates::from_counts(std::int64_t n, std::int64_t op, std::int64_t oi, std::int64_t both) {
  if (n <= 0) throw InputError("issue rates need n > 0");
  for (auto c : {op, oi, both}) {
    if (c < 0 || c > n) throw InputError("issue count " + std::to_string(c) + " outside [0, " + std::to_string(n) + "]");
  }
  IssueRates r;
  r.n = n;
  r.over_praise = {op, Percent2::of(op, n)};
  r.over_inference = {oi, Percent2::of(oi, n)};
  r.both = {both, Percent2::of(both, n)};
  return r;
}

json IssueRates::to_json() const {
  auto cp = [](const CountPercent& c) { return json{{"count", c.count}, {"percent", c.percent.str()}}; };
  return {{"n", n}, {"over_praise", cp(over_praise)}, {"over_inference", cp(over_inference)}, {"both", cp(both)}};
}

IssueRates IssueRates::from_json(const json& j) {
  auto r = from_counts(j.at("n").get<std::int64_t>(), j.at("over_praise").at("count").get<std::int64_t>(),
                       j.at("over_inference").at("count").get<std::int64_t>(), j.at("both").at("count").get<std::int64_t>());
  for (auto [key, cp] : {std::pair{"over_praise", &r.over_praise}, std::pair{"over_inference", &r.over_inference},
                         std::pair{"both", &r.both}}) {
    const auto& node = j.at(key);
    if (node.contains("percent") && Percent2::parse(node.at("percent").get<std::string>()) != cp->percent) {
      throw IntegrityError(std::string("stored percent for ") + key + " does not match its count");
    }
  }
  return r;
}

IssueRates tally(std::span<const IssueObservation> labels, std::int64_t n) {
  if (n <= 0) throw InputError("tally needs a run size n > 0");
  if (static_cast<std::int64_t>(labels.size()) > n) {
    throw InputError("tally: " + std::to_string(labels.size()) + " labels exceed run size " + std::to_string(n));
  }
  std::set<std::string_view> ids;
  std::int64_t op = 0, oi = 0, both = 0;
  for (const auto& l : labels) {
    if (!ids.insert(l.record_id).second) throw InputError("tally: duplicate label for record '" + l.record_id + "'");
    op += l.over_praise;
    oi += l.over_inference;
    both += l.over_praise && l.over_inference;
  }
  return IssueRates::from_counts(n, op, oi, both);
}

double chi_square(const ContingencyTable2x2& t) {
  for (auto v : {t.a, t.b, t.c, t.d}) {
    if (v < 0) throw InputError("contingency table cells must be non-negative");
  }
  const long double a = t.a, b = t.b, c = t.c, d = t.d;
  const long double r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
  if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
    throw InputError("chi-square undefined: a row or column total is zero (an exact test would be needed)");
  }
  const long double n = r1 + r2;
  const long double cross = a * d - b * c;
  return static_cast<double>(n * cross * cross / (r1 * r2 * c1 * c2));
}

double p_value(double statistic) {
  if (std::isnan(statistic) || statistic < 0) throw InputError("p-value needs a non-negative statistic");
  return std::erfc(std::sqrt(statistic / 2.0));
}

double round_to(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

std::string format_statistic(double statistic) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", round_to(statistic, 3));
  return buf;
}

std::string format_p(double p) {
  if (p < 0.0005) return "0.000";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", round_to(p, 3));
  return buf;
}

std::string_view to_string(IssueDimension dim) {
  switch (dim) {
    case IssueDimension::OverPraise: return "over_praise";
    case IssueDimension::OverInference: return "over_inference";
    case IssueDimension::Both: return "both";
  }
  return "";
}

const CountPercent& select(const IssueRates& rates, IssueDimension dim) {
  switch (dim) {
    case IssueDimension::OverPraise: return rates.over_praise;
    case IssueDimension::OverInference: return rates.over_inference;
    case IssueDimension::Both: return rates.both;
  }
  return rates.both;
}

Comparison compare_runs(const IssueRates& single, const IssueRates& multi) {
  if (single.n <= 0 || multi.n <= 0) throw InputError("compare_runs needs non-empty runs");
  Comparison cmp{single, multi, {}};
  for (std::size_t i = 0; i < kAllDimensions.size(); ++i) {
    auto dim = kAllDimensions[i];
    const auto& s = select(single, dim);
    const auto& m = select(multi, dim);
    DimensionResult& out = cmp.dimensions[i];
    out.dimension = dim;
    out.table = {s.count, single.n - s.count, m.count, multi.n - m.count};
    if (out.table.a + out.table.c == 0 || out.table.b + out.table.d == 0) {
      // Same proportion (0% or 100%) in both runs: no association to test.
      out.statistic = 0.0;
      out.p = 1.0;
    } else {
      out.statistic = chi_square(out.table);
      out.p = p_value(out.statistic);
    }
    // 100 * (s/ns - m/nm) in hundredths, exact from counts.
    out.delta = Percent2::from_hundredths(
        round_ratio((s.count * multi.n - m.count * single.n) * 10000, single.n * multi.n));
  }
  return cmp;
}

json Comparison::to_json() const {
  json dims = json::array();
  for (const auto& d : dimensions) {
    dims.push_back({{"dimension", to_string(d.dimension)},
                    {"table", {d.table.a, d.table.b, d.table.c, d.table.d}},
                    {"statistic", d.statistic},
                    {"statistic_rounded", format_statistic(d.statistic)},
                    {"p", d.p},
                    {"p_rounded", format_p(d.p)},
                    {"delta", d.delta.str()}});
  }
  return {{"single", single.to_json()}, {"multi", multi.to_json()}, {"dimensions", dims}};
}

Comparison Comparison::from_json(const json& j) {
  Comparison c;
  c.single = IssueRates::from_json(j.at("single"));
  c.multi = IssueRates::from_json(j.at("multi"));
  const auto& dims = j.at("dimensions");
  if (dims.size() != 3) throw InputError("comparison needs three dimensions");
  for (std::size_t i = 0; i < 3; ++i) {
    auto& d = c.dimensions[i];
    d.dimension = kAllDimensions[i];
    auto t = dims[i].at("table").get<std::array<std::int64_t, 4>>();
    d.table = {t[0], t[1], t[2], t[3]};
    d.statistic = dims[i].at("statistic").get<double>();
    d.p = dims[i].at("p").get<double>();
    d.delta = Percent2::parse(dims[i].at("delta").get<std::string>());
  }
  return c;
}

}  // namespace autofeedback::stats
