#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autofeedback/core_model.hpp"
#include "autofeedback/llm_client.hpp"
#include "autofeedback/promptkit.hpp"
#include "autofeedback/verdict.hpp"

namespace autofeedback::pipeline {

inline constexpr const char* kRecordsFileName = "records.jsonl";
inline constexpr const char* kManifestFileName = "manifest.json";

struct RunConfig {
  RunMode mode = RunMode::Multi;
  std::filesystem::path dataset;
  std::filesystem::path context;
  std::filesystem::path agent1_template;
  std::filesystem::path agent2_template;
  std::filesystem::path loopback_template;  // required when max_validation_rounds > 1
  std::filesystem::path output_dir;

  std::string model = "gpt-4o";
  double temperature = llm::kDefaultTemperature;
  int max_output_tokens = llm::kDefaultMaxOutputTokens;
  bool split_role_system = false;  // Role block as a separate system message

  int concurrency = 4;
  std::uint64_t seed = 0;
  int max_validation_rounds = 1;

  /// Backend settings echoed into the manifest. Must not hold secrets.
  nlohmann::json backend_snapshot = nlohmann::json::object();

  /// Throws InputError when a path is missing or a limit is out of range.
  void validate() const;
  nlohmann::json to_json() const;
};

struct RunFailure {
  std::string response_id;
  std::string stage;  // "agent1", "agent2", "parse", "finalize"
  std::string error;
};

struct RunManifest {
  nlohmann::json config;
  std::map<std::string, std::string> template_digests;
  std::string dataset_digest;
  std::string context_digest;
  std::string backend_fingerprint;
  std::string started_at;
  std::string finished_at;
  std::size_t inputs = 0;
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::vector<RunFailure> failures;

  nlohmann::json to_json() const;
};

struct RunResult {
  RunManifest manifest;
  std::vector<RunRecord> records;  // sorted by response id
};

/// `model@<digest of sampling parameters>`.
std::string backend_fingerprint(const std::string& model, double temperature, int max_output_tokens,
                                bool split_role_system);

/// One user message holding the whole prompt, or the Role block as a system
/// message followed by the rest of the prompt.
std::vector<llm::ChatMessage> to_messages(const std::string& prompt, const prompt::PromptTemplate& tmpl,
                                          bool split_role_system);

/// Everything needed to assemble a RunRecord.
struct RecordParts {
  const StudentResponse* response = nullptr;
  RunMode mode = RunMode::Single;
  std::string agent1_prompt;
  FeedbackDocument agent1_feedback;
  std::optional<std::string> agent2_prompt;
  std::optional<std::string> agent2_raw;
  std::optional<ValidationVerdict> verdict;
  std::vector<CallUsage> token_usage;
  std::int64_t wall_time_ms = 0;
  std::string backend_fingerprint;
  std::vector<EarlierRound> earlier_rounds;
};

/// Selects the final feedback and annotates the word limit. Throws
/// InvariantError when the parts do not fit the mode.
RunRecord finalize(RecordParts parts);

/// Generates feedback for single responses. Immutable and safe to share
/// across worker threads as long as the backend is.
class Pipeline {
 public:
  struct Templates {
    prompt::PromptTemplate agent1;
    std::optional<prompt::PromptTemplate> agent2;
    std::optional<prompt::PromptTemplate> loopback;
  };

  Pipeline(AssessmentContext context, Templates templates, llm::ChatBackend& backend, RunConfig settings);

  /// Throws BackendError / InputError tagged through StageError.
  RunRecord process(const StudentResponse& response) const;

 private:
  llm::ChatResponse call(const std::string& prompt, const prompt::PromptTemplate& tmpl) const;

  AssessmentContext context_;
  Templates templates_;
  llm::ChatBackend& backend_;
  RunConfig settings_;
  std::string fingerprint_;
};

/// Failure during one pipeline stage; `stage()` names it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& message) : Error(message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Processes every response of the dataset with a bounded worker pool and
/// writes `records.jsonl` and `manifest.json` into `cfg.output_dir`.
/// Configuration, template and dataset errors throw before any backend call;
/// per-response failures are collected in the manifest.
RunResult run(const RunConfig& cfg, llm::ChatBackend& backend, std::ostream* progress = nullptr);

nlohmann::ordered_json record_to_json(const RunRecord& record);
/// Rebuilds and validates a record. Throws InputError / InvariantError.
RunRecord record_from_json(const nlohmann::json& j);
std::string serialize_records(const std::vector<RunRecord>& records);
std::vector<RunRecord> parse_records(std::string_view jsonl, const std::string& source = "<records>");
/// Accepts a records file or a run directory.
std::vector<RunRecord> read_run_file(const std::filesystem::path& path);

}  // namespace autofeedback::pipeline
