#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "autofeedback/annotator.hpp"
#include "autofeedback/core_model.hpp"
#include "autofeedback/statlab.hpp"

namespace autofeedback::report {

enum class TableFormat { Markdown, Csv };

std::string_view to_string(TableFormat format);
std::optional<TableFormat> parse_table_format(std::string_view text);

/// Previously published cells ("37/15.42") and deltas ("14.17") to check
/// count-derived numbers against.
struct PublishedTable {
  std::array<std::string, 3> single;
  std::array<std::string, 3> multi;
  std::array<std::string, 3> delta;

  static PublishedTable from_json(const nlohmann::json& j);
  static PublishedTable load(const std::filesystem::path& path);
};

/// Notes for every published cell whose count matches ours but whose
/// percent does not, and every published delta that differs from the
/// count-derived delta while both counts match.
std::vector<std::string> discrepancy_footnotes(const stats::Comparison& cmp, const PublishedTable& published);

struct ComparisonReport {
  stats::Comparison comparison;
  std::string single_run;  // run identifier, e.g. manifest digest
  std::string multi_run;
  std::vector<std::string> footnotes;
  std::string generated_at;
};

/// Just the table: "count/percent" cells, statistics to 3 decimals, p as
/// "0.000" below 0.0005, percentage-point deltas.
std::string render_table(const stats::Comparison& cmp, TableFormat format);

/// Table plus provenance and footnotes.
std::string render_report(const ComparisonReport& report, TableFormat format);

/// Numbers read back from a rendered table (either format).
struct ParsedTable {
  std::array<stats::CountPercent, 3> single;
  std::array<stats::CountPercent, 3> multi;
  std::array<std::string, 3> statistic;
  std::array<std::string, 3> p;
  std::array<stats::Percent2, 3> delta;

  friend bool operator==(const ParsedTable&, const ParsedTable&);
};

ParsedTable parse_table(std::string_view rendered, TableFormat format);

/// Exhibit of one record: response, Agent 1 feedback and, in multi mode,
/// Agent 2's reasons, decision and revision, plus any human labels.
std::string render_case(const RunRecord& record, const std::vector<annotate::AnnotationLabel>* labels = nullptr);

}  // namespace autofeedback::report
