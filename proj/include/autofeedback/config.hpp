#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace autofeedback::config {

struct BackendConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string max_tokens_field = "max_tokens";
  std::string api_key_env = "OPENAI_API_KEY";  // name of the variable, never its value
  int max_in_flight = 8;
  int max_attempts = 5;
  int base_delay_ms = 1000;
  int max_delay_ms = 60000;
  int timeout_s = 120;
  bool split_role_system = false;
};

struct PathsConfig {
  std::filesystem::path templates = "data/templates";
  std::filesystem::path context = "data/contexts/ms_ps1_4.json";
  std::filesystem::path cache = "cache";
  std::filesystem::path output_root = "out";
  std::filesystem::path mock_fixtures;  // optional digest -> text table
};

struct SamplingConfig {
  std::uint64_t seed = 7;
  int n_per_class = 120;
  int pilot_per_class = 15;
  bool allow_pilot_overlap = false;
};

struct RunSettings {
  int concurrency = 4;
  int max_validation_rounds = 1;
};

struct AnnotationConfig {
  double overlap_fraction = 0.30;
  std::uint64_t overlap_seed = 7;
  bool blind = true;
};

struct AppConfig {
  BackendConfig backend;
  PathsConfig paths;
  SamplingConfig sampling;
  RunSettings run;
  AnnotationConfig annotation;

  /// Throws InputError on an out-of-range value.
  void validate() const;
  /// Everything except secrets (there are none in the tree; the key lives
  /// only in the environment).
  nlohmann::json to_json() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Defaults, then the YAML file (if given), then AUTOFEEDBACK_* variables.
/// Command-line flags are applied by the caller afterwards.
AppConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env = process_env);

/// Parses YAML text over `base`. Unknown keys are errors.
AppConfig apply_yaml(AppConfig base, const std::string& yaml_text, const std::string& source = "<config>");

AppConfig apply_env(AppConfig base, const EnvLookup& env);

}  // namespace autofeedback::config
