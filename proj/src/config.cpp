#include "autofeedback/config.hpp"

#include <cstdlib>
#include <map>

#include <yaml-cpp/yaml.h>

#include "autofeedback/error.hpp"
#include "autofeedback/text_util.hpp"

namespace autofeedback::config {

using nlohmann::json;

namespace {

template <class T>
T parse_value(const std::string& raw, const std::string& where) {
  try {
    return YAML::Load(raw).as<T>();
  } catch (const YAML::Exception&) {
    throw InputError(where + ": cannot read '" + raw + "'");
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw InputError(where + ": bad value for '" + key + "'");
  }
}

void read_path(const YAML::Node& node, const char* key, std::filesystem::path& out, const std::string& where) {
  std::string s;
  if (!node[key]) return;
  read(node, key, s, where);
  out = s;
}

void reject_unknown(const YAML::Node& node, std::initializer_list<const char*> known, const std::string& where) {
  if (!node.IsMap()) throw InputError(where + " must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw InputError(where + ": unknown key '" + key + "'");
  }
}

}  // namespace

void AppConfig::validate() const {
  auto fail = [](const std::string& what) { throw InputError("config: " + what); };
  if (backend.model.empty()) fail("backend.model is empty");
  if (!(backend.temperature >= 0.0 && backend.temperature <= 2.0)) fail("backend.temperature must lie in [0, 2]");
  if (backend.max_tokens <= 0) fail("backend.max_tokens must be positive");
  if (backend.api_key_env.empty()) fail("backend.api_key_env is empty");
  if (backend.max_in_flight < 1) fail("backend.max_in_flight must be at least 1");
  if (backend.max_attempts < 1) fail("backend.max_attempts must be at least 1");
  if (backend.base_delay_ms < 0 || backend.max_delay_ms < 0) fail("backend delays must be non-negative");
  if (backend.timeout_s <= 0) fail("backend.timeout_s must be positive");
  if (sampling.n_per_class < 0 || sampling.pilot_per_class < 0) fail("sampling sizes must be non-negative");
  if (run.concurrency < 1) fail("run.concurrency must be at least 1");
  if (run.max_validation_rounds < 1) fail("run.max_validation_rounds must be at least 1");
  if (!(annotation.overlap_fraction >= 0.0 && annotation.overlap_fraction <= 1.0)) {
    fail("annotation.overlap_fraction must lie in [0, 1]");
  }
}

json AppConfig::to_json() const {
  return {{"backend",
           {{"base_url", backend.base_url},
            {"path", backend.path},
            {"model", backend.model},
            {"temperature", backend.temperature},
            {"max_tokens", backend.max_tokens},
            {"max_tokens_field", backend.max_tokens_field},
            {"api_key_env", backend.api_key_env},
            {"max_in_flight", backend.max_in_flight},
            {"max_attempts", backend.max_attempts},
            {"base_delay_ms", backend.base_delay_ms},
            {"max_delay_ms", backend.max_delay_ms},
            {"timeout_s", backend.timeout_s},
            {"split_role_system", backend.split_role_system}}},
          {"paths",
           {{"templates", paths.templates.string()},
            {"context", paths.context.string()},
            {"cache", paths.cache.string()},
            {"output_root", paths.output_root.string()},
            {"mock_fixtures", paths.mock_fixtures.string()}}},
          {"sampling",
           {{"seed", sampling.seed},
            {"n_per_class", sampling.n_per_class},
            {"pilot_per_class", sampling.pilot_per_class},
            {"allow_pilot_overlap", sampling.allow_pilot_overlap}}},
          {"run", {{"concurrency", run.concurrency}, {"max_validation_rounds", run.max_validation_rounds}}},
          {"annotation",
           {{"overlap_fraction", annotation.overlap_fraction},
            {"overlap_seed", annotation.overlap_seed},
            {"blind", annotation.blind}}}};
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v) return std::nullopt;
  return std::string(v);
}

AppConfig apply_yaml(AppConfig c, const std::string& yaml_text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw InputError(source + ": " + e.what());
  }
  if (root.IsNull()) return c;
  reject_unknown(root, {"backend", "paths", "sampling", "run", "annotation"}, source);

  if (auto b = root["backend"]) {
    const std::string w = source + ": backend";
    reject_unknown(b,
                   {"base_url", "path", "model", "temperature", "max_tokens", "max_tokens_field", "api_key_env",
                    "max_in_flight", "max_attempts", "base_delay_ms", "max_delay_ms", "timeout_s",
                    "split_role_system"},
                   w);
    read(b, "base_url", c.backend.base_url, w);
    read(b, "path", c.backend.path, w);
    read(b, "model", c.backend.model, w);
    read(b, "temperature", c.backend.temperature, w);
    read(b, "max_tokens", c.backend.max_tokens, w);
    read(b, "max_tokens_field", c.backend.max_tokens_field, w);
    read(b, "api_key_env", c.backend.api_key_env, w);
    read(b, "max_in_flight", c.backend.max_in_flight, w);
    read(b, "max_attempts", c.backend.max_attempts, w);
    read(b, "base_delay_ms", c.backend.base_delay_ms, w);
    read(b, "max_delay_ms", c.backend.max_delay_ms, w);
    read(b, "timeout_s", c.backend.timeout_s, w);
    read(b, "split_role_system", c.backend.split_role_system, w);
  }
  if (auto p = root["paths"]) {
    const std::string w = source + ": paths";
    reject_unknown(p, {"templates", "context", "cache", "output_root", "mock_fixtures"}, w);
    read_path(p, "templates", c.paths.templates, w);
    read_path(p, "context", c.paths.context, w);
    read_path(p, "cache", c.paths.cache, w);
    read_path(p, "output_root", c.paths.output_root, w);
    read_path(p, "mock_fixtures", c.paths.mock_fixtures, w);
  }
  if (auto s = root["sampling"]) {
    const std::string w = source + ": sampling";
    reject_unknown(s, {"seed", "n_per_class", "pilot_per_class", "allow_pilot_overlap"}, w);
    read(s, "seed", c.sampling.seed, w);
    read(s, "n_per_class", c.sampling.n_per_class, w);
    read(s, "pilot_per_class", c.sampling.pilot_per_class, w);
    read(s, "allow_pilot_overlap", c.sampling.allow_pilot_overlap, w);
  }
  if (auto r = root["run"]) {
    const std::string w = source + ": run";
    reject_unknown(r, {"concurrency", "max_validation_rounds"}, w);
    read(r, "concurrency", c.run.concurrency, w);
    read(r, "max_validation_rounds", c.run.max_validation_rounds, w);
  }
  if (auto a = root["annotation"]) {
    const std::string w = source + ": annotation";
    reject_unknown(a, {"overlap_fraction", "overlap_seed", "blind"}, w);
    read(a, "overlap_fraction", c.annotation.overlap_fraction, w);
    read(a, "overlap_seed", c.annotation.overlap_seed, w);
    read(a, "blind", c.annotation.blind, w);
  }
  return c;
}

AppConfig apply_env(AppConfig c, const EnvLookup& env) {
  auto str = [&](const char* name, std::string& out) {
    if (auto v = env(name)) out = *v;
  };
  auto path = [&](const char* name, std::filesystem::path& out) {
    if (auto v = env(name)) out = *v;
  };
  auto num = [&](const char* name, auto& out) {
    if (auto v = env(name)) out = parse_value<std::decay_t<decltype(out)>>(*v, name);
  };
  str("AUTOFEEDBACK_BASE_URL", c.backend.base_url);
  str("AUTOFEEDBACK_MODEL", c.backend.model);
  str("AUTOFEEDBACK_API_KEY_ENV", c.backend.api_key_env);
  num("AUTOFEEDBACK_TEMPERATURE", c.backend.temperature);
  num("AUTOFEEDBACK_MAX_TOKENS", c.backend.max_tokens);
  num("AUTOFEEDBACK_MAX_IN_FLIGHT", c.backend.max_in_flight);
  path("AUTOFEEDBACK_TEMPLATES", c.paths.templates);
  path("AUTOFEEDBACK_CONTEXT", c.paths.context);
  path("AUTOFEEDBACK_CACHE_DIR", c.paths.cache);
  path("AUTOFEEDBACK_OUTPUT_ROOT", c.paths.output_root);
  num("AUTOFEEDBACK_SEED", c.sampling.seed);
  num("AUTOFEEDBACK_CONCURRENCY", c.run.concurrency);
  return c;
}

AppConfig load_config(const std::optional<std::filesystem::path>& file, const EnvLookup& env) {
  AppConfig c;
  if (file) {
    if (!std::filesystem::is_regular_file(*file)) throw InputError("config file not found: " + file->string());
    c = apply_yaml(std::move(c), text::read_file(*file), file->string());
  }
  c = apply_env(std::move(c), env);
  c.validate();
  return c;
}

}  // namespace autofeedback::config
