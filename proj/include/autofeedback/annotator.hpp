#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autofeedback/core_model.hpp"
#include "autofeedback/statlab.hpp"

namespace autofeedback::annotate {

struct AnnotationLabel {
  std::string record_id;
  std::string rater_id;
  bool over_praise = false;
  bool over_inference = false;
  std::string note;
  std::string timestamp;
  std::string provenance;  // "", "agreed", "adjudicated", "single-rater"

  nlohmann::ordered_json to_json() const;
  static AnnotationLabel from_json(const nlohmann::json& j);
};

/// First line of every label file.
struct LabelFileHeader {
  std::string run_file;
  std::string run_digest;
  std::string rater_id;
  bool blind = true;
  std::optional<std::uint64_t> subset_seed;
  std::optional<double> subset_fraction;
  std::vector<std::string> record_ids;  // presentation order

  nlohmann::ordered_json to_json() const;
  static LabelFileHeader from_json(const nlohmann::json& j);
};

/// A label file as read back: later lines for the same record override
/// earlier ones (amendments are appended, never rewritten).
struct LabelFile {
  LabelFileHeader header;
  std::vector<AnnotationLabel> labels;  // one per record, in header order

  bool complete() const;
  const AnnotationLabel* find(const std::string& record_id) const;
};

LabelFile read_label_file(const std::filesystem::path& path);
/// Writes header plus labels, replacing any existing file.
void write_label_file(const std::filesystem::path& path, const LabelFileHeader& header,
                      const std::vector<AnnotationLabel>& labels);

/// Labels from any label file, keyed by record id. Throws InputError on a
/// duplicate record id within `labels`.
std::vector<stats::IssueObservation> to_observations(const std::vector<AnnotationLabel>& labels);

/// round(fraction * n) ids chosen by the dataset sampler, sorted.
std::vector<std::string> select_overlap(const std::vector<std::string>& record_ids, double fraction,
                                        std::uint64_t seed);

/// What a rater sees for one record. With `blind`, nothing identifies the
/// system that produced the feedback.
std::string render_card(const RunRecord& record, std::size_t position, std::size_t total, bool blind);

struct SessionOptions {
  std::filesystem::path run_file;
  std::filesystem::path label_file;
  std::string rater_id;
  bool blind = true;
  bool amend = false;
  std::optional<std::vector<std::string>> subset;
  std::optional<std::uint64_t> subset_seed;
  std::optional<double> subset_fraction;
  std::function<std::string()> clock;  // ISO-8601 timestamps; defaults to UTC now
};

struct SessionResult {
  std::size_t presented = 0;
  std::size_t labeled = 0;
  std::size_t total = 0;
  bool complete = false;
};

/// Interactive labeling loop. Appends one line per answered record, so an
/// interrupted session resumes at the first unlabeled record. Throws
/// InputError on unknown subset ids, a label file from another session, or
/// a complete label file without `amend`.
SessionResult run_session(const std::vector<RunRecord>& records, const SessionOptions& options, std::istream& in,
                          std::ostream& out);

struct DimensionAgreement {
  std::size_t matches = 0;
  stats::Percent2 percent;
  std::optional<double> kappa;  // undefined when expected agreement is 1
};

struct Agreement {
  std::size_t total = 0;
  DimensionAgreement over_praise;
  DimensionAgreement over_inference;
  DimensionAgreement overall;  // both dimensions match
  std::vector<std::string> disagreements;

  nlohmann::ordered_json to_json() const;
};

/// Throws InputError listing the symmetric difference when the label sets
/// do not cover the same records.
Agreement agreement(const std::vector<AnnotationLabel>& a, const std::vector<AnnotationLabel>& b);

struct ResolutionDecision {
  std::string record_id;
  bool over_praise = false;
  bool over_inference = false;
  std::string note;
};

std::vector<ResolutionDecision> read_decisions(const std::filesystem::path& path);

/// Agreed labels plus adjudicated decisions under `rater_id`. Decisions must
/// cover exactly the disagreement list.
std::vector<AnnotationLabel> resolve(const std::vector<AnnotationLabel>& a, const std::vector<AnnotationLabel>& b,
                                     const std::vector<ResolutionDecision>& decisions,
                                     const std::string& rater_id = "consensus");

/// Consolidated overlap labels plus one rater's labels for the rest. Overlap
/// entries win; the remainder is marked "single-rater".
std::vector<AnnotationLabel> merge_with_remainder(const std::vector<AnnotationLabel>& consolidated,
                                                  const std::vector<AnnotationLabel>& remainder);

}  // namespace autofeedback::annotate
