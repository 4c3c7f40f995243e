#include "autofeedback/report.hpp"

#include <sstream>

#include "autofeedback/error.hpp"
#include "autofeedback/text_util.hpp"

namespace autofeedback::report {

using nlohmann::json;
using stats::Comparison;
using stats::CountPercent;
using stats::Percent2;

namespace {

constexpr std::array<std::string_view, 3> kColumnTitles = {"Over-praise", "Over-inference", "Both"};
constexpr std::string_view kRowSingle = "Single agent";
constexpr std::string_view kRowMulti = "Multi-agent";
constexpr std::string_view kRowStatistic = "Chi-square";
constexpr std::string_view kRowP = "p";
constexpr std::string_view kRowDelta = "Difference (points)";

std::string cell(const CountPercent& cp) { return std::to_string(cp.count) + "/" + cp.percent.str(); }

CountPercent parse_cell(std::string_view s) {
  s = text::trim(s);
  auto slash = s.find('/');
  if (slash == std::string_view::npos) throw InputError("table cell '" + std::string(s) + "' is not count/percent");
  CountPercent cp;
  try {
    std::size_t used = 0;
    std::string count(s.substr(0, slash));
    cp.count = std::stoll(count, &used);
    if (used != count.size()) throw std::invalid_argument("count");
  } catch (const std::exception&) {
    throw InputError("table cell '" + std::string(s) + "' has a bad count");
  }
  cp.percent = Percent2::parse(s.substr(slash + 1));
  return cp;
}

std::vector<std::vector<std::string>> table_rows(const Comparison& cmp) {
  std::vector<std::vector<std::string>> rows;
  auto row = [&](std::string_view title, auto&& fn) {
    std::vector<std::string> r{std::string(title)};
    for (std::size_t i = 0; i < 3; ++i) r.push_back(fn(i));
    rows.push_back(std::move(r));
  };
  row(kRowSingle, [&](std::size_t i) { return cell(stats::select(cmp.single, stats::kAllDimensions[i])); });
  row(kRowMulti, [&](std::size_t i) { return cell(stats::select(cmp.multi, stats::kAllDimensions[i])); });
  row(kRowStatistic, [&](std::size_t i) { return stats::format_statistic(cmp.dimensions[i].statistic); });
  row(kRowP, [&](std::size_t i) { return stats::format_p(cmp.dimensions[i].p); });
  row(kRowDelta, [&](std::size_t i) { return cmp.dimensions[i].delta.str(); });
  return rows;
}

std::vector<std::string> split_cells(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.emplace_back(text::trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.emplace_back(text::trim(cur));
  return out;
}

std::string yes_no(bool v) { return v ? "yes" : "no"; }

}  // namespace

std::string_view to_string(TableFormat format) { return format == TableFormat::Markdown ? "markdown" : "csv"; }

std::optional<TableFormat> parse_table_format(std::string_view text) {
  auto t = text::to_lower_ascii(text::trim(text));
  if (t == "markdown" || t == "md") return TableFormat::Markdown;
  if (t == "csv") return TableFormat::Csv;
  return std::nullopt;
}

PublishedTable PublishedTable::from_json(const json& j) {
  PublishedTable t;
  try {
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string key(stats::to_string(stats::kAllDimensions[i]));
      t.single[i] = j.at("single").at(key).get<std::string>();
      t.multi[i] = j.at("multi").at(key).get<std::string>();
      t.delta[i] = j.at("delta").at(key).get<std::string>();
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("published table: ") + e.what());
  }
  return t;
}

PublishedTable PublishedTable::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw InputError("published table not found: " + path.string());
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> discrepancy_footnotes(const Comparison& cmp, const PublishedTable& published) {
  std::vector<std::string> notes;
  std::array<bool, 3> counts_match{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto dim = stats::kAllDimensions[i];
    bool both = true;
    auto check = [&](std::string_view row, const stats::IssueRates& rates, const std::string& pub) {
      const CountPercent ours = stats::select(rates, dim);
      const CountPercent theirs = parse_cell(pub);
      if (theirs.count != ours.count) {
        both = false;
        return;
      }
      if (theirs.percent != ours.percent) {
        notes.push_back(std::string(row) + ", " + std::string(text::to_lower_ascii(kColumnTitles[i])) + ": " +
                        std::to_string(ours.count) + " of " + std::to_string(rates.n) + " is " + ours.percent.str() +
                        "%; the published table prints " + theirs.percent.str() + ".");
      }
    };
    check(kRowSingle, cmp.single, published.single[i]);
    check(kRowMulti, cmp.multi, published.multi[i]);
    counts_match[i] = both;
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (!counts_match[i]) continue;
    const Percent2 theirs = Percent2::parse(published.delta[i]);
    const Percent2 ours = cmp.dimensions[i].delta;
    if (theirs != ours) {
      notes.push_back(std::string(kColumnTitles[i]) + " difference: the counts give " + ours.str() +
                      " percentage points; the published figure is " + theirs.str() + ".");
    }
  }
  return notes;
}

std::string render_table(const Comparison& cmp, TableFormat format) {
  const auto rows = table_rows(cmp);
  std::ostringstream out;
  if (format == TableFormat::Markdown) {
    out << "| |";
    for (auto t : kColumnTitles) out << " " << t << " |";
    out << "\n|---|---|---|---|\n";
    for (const auto& r : rows) {
      out << "|";
      for (const auto& c : r) out << " " << c << " |";
      out << "\n";
    }
  } else {
    out << "row";
    for (auto t : kColumnTitles) out << "," << t;
    out << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << "\n";
    }
  }
  return out.str();
}

std::string render_report(const ComparisonReport& report, TableFormat format) {
  std::string table = render_table(report.comparison, format);
  if (format == TableFormat::Csv) {
    // Provenance travels as comment lines so the table stays parseable.
    std::string out = "# single_run," + report.single_run + "\n# multi_run," + report.multi_run + "\n";
    out += "# generated_at," + report.generated_at + "\n";
    out += table;
    for (const auto& f : report.footnotes) out += "# note," + f + "\n";
    return out;
  }
  std::ostringstream out;
  out << "# Feedback issue comparison\n\n";
  out << "- Single-agent run: `" << report.single_run << "` (n = " << report.comparison.single.n << ")\n";
  out << "- Multi-agent run: `" << report.multi_run << "` (n = " << report.comparison.multi.n << ")\n";
  out << "- Generated: " << report.generated_at << "\n\n";
  out << table << "\n";
  out << "Cells are count/percent of the run's feedback. Chi-square is Pearson's statistic without continuity "
         "correction (df = 1); the difference row is single minus multi in percentage points.\n";
  if (!report.footnotes.empty()) {
    out << "\n";
    for (std::size_t i = 0; i < report.footnotes.size(); ++i) {
      out << "[" << (i + 1) << "] " << report.footnotes[i] << "\n";
    }
  }
  return out.str();
}

bool operator==(const ParsedTable& a, const ParsedTable& b) {
  for (std::size_t i = 0; i < 3; ++i) {
    if (a.single[i].count != b.single[i].count || a.single[i].percent != b.single[i].percent) return false;
    if (a.multi[i].count != b.multi[i].count || a.multi[i].percent != b.multi[i].percent) return false;
  }
  return a.statistic == b.statistic && a.p == b.p && a.delta == b.delta;
}

ParsedTable parse_table(std::string_view rendered, TableFormat format) {
  ParsedTable t;
  std::array<bool, 5> seen{};
  for (const auto& line : text::split_lines(rendered)) {
    auto l = text::trim(line.text);
    std::vector<std::string> cells;
    if (format == TableFormat::Markdown) {
      if (l.size() < 2 || l.front() != '|' || l.back() != '|') continue;
      cells = split_cells(l.substr(1, l.size() - 2), '|');
    } else {
      if (l.empty() || l.front() == '#') continue;
      cells = split_cells(l, ',');
    }
    if (cells.size() != 4) continue;
    const std::string& title = cells[0];
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string& c = cells[i + 1];
      if (title == kRowSingle) t.single[i] = parse_cell(c), seen[0] = true;
      else if (title == kRowMulti) t.multi[i] = parse_cell(c), seen[1] = true;
      else if (title == kRowStatistic) t.statistic[i] = c, seen[2] = true;
      else if (title == kRowP) t.p[i] = c, seen[3] = true;
      else if (title == kRowDelta) t.delta[i] = Percent2::parse(c), seen[4] = true;
    }
  }
  for (bool s : seen) {
    if (!s) throw InputError("rendered table is missing a row");
  }
  return t;
}

std::string render_case(const RunRecord& r, const std::vector<annotate::AnnotationLabel>* labels) {
  std::ostringstream out;
  out << "# Case " << r.response_id << "\n\n";
  out << "- Mode: " << (r.mode == RunMode::Single ? "single agent" : "multi-agent") << "\n";
  out << "- Score level: " << to_string(r.score_level) << "\n";
  out << "- Final feedback words: " << r.final_feedback.word_count()
      << (r.over_word_limit ? " (over the word limit)" : "") << "\n";
  if (r.verdict && r.verdict->needs_review()) {
    out << "- **Needs human review:** Agent 2's output had no recognizable verdict; it is kept whole as the revision.\n";
  }
  out << "\n## Student response\n\n" << r.response_text << "\n";
  out << "\n## Agent 1 feedback\n\n" << r.agent1_feedback.raw_text() << "\n";
  for (std::size_t i = 0; i < r.earlier_rounds.size(); ++i) {
    out << "\n## Earlier round " << (i + 1) << "\n\n### Agent 1\n\n" << r.earlier_rounds[i].agent1_raw
        << "\n\n### Agent 2\n\n" << r.earlier_rounds[i].agent2_raw << "\n";
  }
  if (r.verdict) {
    const auto& v = *r.verdict;
    out << "\n## Agent 2 reasons\n\n" << (text::trim(v.reasons()).empty() ? "(none given)" : v.reasons()) << "\n";
    out << "\n- Decision: " << (v.decision() == Decision::GoodEnough ? "good enough" : "revised") << "\n";
    out << "- Detected issues: ";
    if (v.detected_issues().empty()) out << "none";
    bool first = true;
    for (auto k : v.detected_issues()) {
      out << (first ? "" : ", ") << to_string(k);
      first = false;
    }
    out << "\n";
    if (v.revised_feedback()) out << "\n## Revised feedback\n\n" << v.revised_feedback()->raw_text() << "\n";
  }
  if (labels) {
    std::vector<const annotate::AnnotationLabel*> mine;
    for (const auto& l : *labels) {
      if (l.record_id == r.response_id) mine.push_back(&l);
    }
    out << "\n## Human labels\n\n";
    if (mine.empty()) out << "(not labeled)\n";
    for (const auto* l : mine) {
      out << "- " << l->rater_id << ": over-praise " << yes_no(l->over_praise) << ", over-inference "
          << yes_no(l->over_inference);
      if (!l->provenance.empty()) out << " [" << l->provenance << "]";
      if (!l->note.empty()) out << " (" << l->note << ")";
      out << "\n";
    }
  }
  return out.str();
}

}  // namespace autofeedback::report
