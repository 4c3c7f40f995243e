#include "autofeedback/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <mutex>
#include <ostream>
#include <thread>

#include "autofeedback/datasetio.hpp"
#include "autofeedback/digest.hpp"
#include "autofeedback/text_util.hpp"

namespace autofeedback::pipeline {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string utc_now() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_file(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw InputError(std::string(what) + " path is not set");
  if (!std::filesystem::is_regular_file(p)) throw InputError(std::string(what) + " not found: " + p.string());
}

ordered_json feedback_json(const FeedbackDocument& doc) {
  ordered_json j;
  j["text"] = doc.raw_text();
  j["word_count"] = doc.word_count();
  if (doc.sections()) {
    ordered_json s = ordered_json::object();
    for (auto sec : kAllFeedbackSections) {
      auto it = doc.sections()->find(sec);
      if (it != doc.sections()->end()) s[std::string(to_string(sec))] = it->second;
    }
    j["sections"] = s;
  } else {
    j["sections"] = nullptr;
  }
  return j;
}

FeedbackDocument feedback_from_json(const json& j, const std::string& field) {
  FeedbackDocument doc(j.at("text").get<std::string>());
  if (j.contains("word_count") && j["word_count"].get<std::size_t>() != doc.word_count()) {
    throw IntegrityError(field + ": stored word count " + j["word_count"].dump() + " differs from the text (" +
                         std::to_string(doc.word_count()) + ")");
  }
  return doc;
}

std::string task_header(const prompt::PromptTemplate& tmpl) {
  for (const auto& s : tmpl.sections()) {
    if (s.tag == "Task") return s.header;
  }
  return {};
}

}  // namespace

void RunConfig::validate() const {
  require_file(dataset, "dataset");
  require_file(context, "context");
  require_file(agent1_template, "Agent 1 template");
  if (mode == RunMode::Multi) require_file(agent2_template, "Agent 2 template");
  if (concurrency < 1) throw InputError("concurrency must be at least 1");
  if (max_validation_rounds < 1) throw InputError("max_validation_rounds must be at least 1");
  if (mode == RunMode::Multi && max_validation_rounds > 1) require_file(loopback_template, "loopback template");
  if (output_dir.empty()) throw InputError("output directory is not set");
  if (model.empty()) throw InputError("model is not set");
}

json RunConfig::to_json() const {
  json j = {{"mode", to_string(mode)},
            {"dataset", dataset.string()},
            {"context", context.string()},
            {"agent1_template", agent1_template.string()},
            {"output_dir", output_dir.string()},
            {"model", model},
            {"temperature", temperature},
            {"max_output_tokens", max_output_tokens},
            {"split_role_system", split_role_system},
            {"concurrency", concurrency},
            {"seed", seed},
            {"max_validation_rounds", max_validation_rounds},
            {"backend", backend_snapshot}};
  if (mode == RunMode::Multi) j["agent2_template"] = agent2_template.string();
  if (!loopback_template.empty()) j["loopback_template"] = loopback_template.string();
  return j;
}

json RunManifest::to_json() const {
  json fails = json::array();
  for (const auto& f : failures) fails.push_back({{"response_id", f.response_id}, {"stage", f.stage}, {"error", f.error}});
  return {{"config", config},
          {"template_digests", template_digests},
          {"dataset_digest", dataset_digest},
          {"context_digest", context_digest},
          {"backend_fingerprint", backend_fingerprint},
          {"started_at", started_at},
          {"finished_at", finished_at},
          {"counts", {{"inputs", inputs}, {"succeeded", succeeded}, {"failed", failed}}},
          {"failures", fails}};
}

std::string backend_fingerprint(const std::string& model, double temperature, int max_output_tokens,
                                bool split_role_system) {
  json params = {{"max_output_tokens", max_output_tokens},
                 {"split_role_system", split_role_system},
                 {"temperature", temperature}};
  return model + "@" + sha256_hex(params.dump()).substr(0, 16);
}

std::vector<llm::ChatMessage> to_messages(const std::string& prompt, const prompt::PromptTemplate& tmpl,
                                          bool split_role_system) {
  if (!split_role_system) return {{llm::Role::User, prompt}};
  const std::string header = task_header(tmpl);
  for (const auto& line : text::split_lines(prompt)) {
    if (!header.empty() && text::trim(line.text) == header) {
      std::string system(text::trim(std::string_view(prompt).substr(0, line.offset)));
      std::string user = prompt.substr(line.offset);
      if (system.empty()) break;
      return {{llm::Role::System, system}, {llm::Role::User, user}};
    }
  }
  return {{llm::Role::User, prompt}};
}

RunRecord finalize(RecordParts parts) {
  if (!parts.response) throw InvariantError("finalize called without a response");
  RunRecord r;
  r.response_id = parts.response->id;
  r.mode = parts.mode;
  r.response_text = parts.response->text;
  r.score_level = parts.response->score_level;
  r.agent1_prompt = std::move(parts.agent1_prompt);
  r.agent1_feedback = std::move(parts.agent1_feedback);
  r.agent2_prompt = std::move(parts.agent2_prompt);
  r.agent2_raw = std::move(parts.agent2_raw);
  r.verdict = std::move(parts.verdict);
  if (r.mode == RunMode::Multi && r.verdict && r.verdict->decision() == Decision::Revised) {
    r.final_feedback = *r.verdict->revised_feedback();
  } else {
    r.final_feedback = r.agent1_feedback;
  }
  r.over_word_limit = r.final_feedback.over_word_limit();
  r.token_usage = std::move(parts.token_usage);
  r.wall_time_ms = parts.wall_time_ms;
  r.backend_fingerprint = std::move(parts.backend_fingerprint);
  r.earlier_rounds = std::move(parts.earlier_rounds);
  r.validate();
  return r;
}

// --- pipeline ---------------------------------------------------------------

Pipeline::Pipeline(AssessmentContext context, Templates templates, llm::ChatBackend& backend, RunConfig settings)
    : context_(std::move(context)),
      templates_(std::move(templates)),
      backend_(backend),
      settings_(std::move(settings)) {
  context_.validate();
  if (templates_.agent1.name() != prompt::AgentKind::Agent1) throw InputError("Agent 1 template declares another agent");
  if (settings_.mode == RunMode::Multi) {
    if (!templates_.agent2) throw InputError("multi mode needs an Agent 2 template");
    if (templates_.agent2->name() != prompt::AgentKind::Agent2) throw InputError("Agent 2 template declares another agent");
    if (settings_.max_validation_rounds > 1 && !templates_.loopback) {
      throw InputError("more than one validation round needs a loopback template");
    }
  }
  fingerprint_ = backend_fingerprint(settings_.model, settings_.temperature, settings_.max_output_tokens,
                                     settings_.split_role_system);
}

llm::ChatResponse Pipeline::call(const std::string& prompt, const prompt::PromptTemplate& tmpl) const {
  llm::ChatRequest req(settings_.model, to_messages(prompt, tmpl, settings_.split_role_system), settings_.temperature,
                       settings_.max_output_tokens);
  return backend_.complete(req);
}

RunRecord Pipeline::process(const StudentResponse& response) const {
  RecordParts parts;
  parts.response = &response;
  parts.mode = settings_.mode;
  parts.backend_fingerprint = fingerprint_;

  auto stage = [&](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const InvariantError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(name, e.what());
    }
  };
  auto account = [&](const std::string& call, const llm::ChatResponse& r) {
    parts.token_usage.push_back({call, r.prompt_tokens, r.completion_tokens});
    parts.wall_time_ms += r.latency_ms;
  };

  parts.agent1_prompt = stage("agent1", [&] { return prompt::assemble_agent1(context_, response, templates_.agent1); });
  auto r1 = stage("agent1", [&] { return call(parts.agent1_prompt, templates_.agent1); });
  account("agent1", r1);
  parts.agent1_feedback = FeedbackDocument(r1.text);

  if (settings_.mode == RunMode::Single) return finalize(std::move(parts));

  for (int round = 1;; ++round) {
    const std::string suffix = round == 1 ? "" : ".round" + std::to_string(round);
    auto p2 = stage("agent2", [&] {
      return prompt::assemble_agent2(context_, response, parts.agent1_feedback, *templates_.agent2);
    });
    auto r2 = stage("agent2", [&] { return call(p2, *templates_.agent2); });
    account("agent2" + suffix, r2);
    auto verdict = stage("parse", [&] { return parse_verdict(r2.text); });

    const bool last = round >= settings_.max_validation_rounds || verdict.decision() == Decision::GoodEnough;
    if (last) {
      parts.agent2_prompt = std::move(p2);
      parts.agent2_raw = std::move(r2.text);
      parts.verdict = std::move(verdict);
      break;
    }
    parts.earlier_rounds.push_back({parts.agent1_feedback.raw_text(), r2.text});
    const std::string critique = text::trim(verdict.reasons()).empty() ? r2.text : verdict.reasons();
    const std::string next = "agent1.round" + std::to_string(round + 1);
    parts.agent1_prompt = stage("agent1", [&] {
      return prompt::assemble_agent1_with_critique(context_, response, critique, *templates_.loopback);
    });
    auto again = stage("agent1", [&] { return call(parts.agent1_prompt, *templates_.loopback); });
    account(next, again);
    parts.agent1_feedback = FeedbackDocument(again.text);
  }
  return finalize(std::move(parts));
}

// --- batch run --------------------------------------------------------------

RunResult run(const RunConfig& cfg, llm::ChatBackend& backend, std::ostream* progress) {
  cfg.validate();

  // Everything that can be checked offline is checked before the first call.
  AssessmentContext context = prompt::load_context(cfg.context);
  Pipeline::Templates templates{prompt::load_template(cfg.agent1_template), std::nullopt, std::nullopt};
  std::map<std::string, std::string> digests = {{"agent1", templates.agent1.digest()}};
  if (cfg.mode == RunMode::Multi) {
    templates.agent2 = prompt::load_template(cfg.agent2_template);
    digests["agent2"] = templates.agent2->digest();
    if (cfg.max_validation_rounds > 1) {
      templates.loopback = prompt::load_template(cfg.loopback_template);
      digests["loopback"] = templates.loopback->digest();
    }
  }
  const data::Corpus corpus = data::load_corpus(cfg.dataset);
  const Pipeline pipeline(context, std::move(templates), backend, cfg);

  RunResult result;
  RunManifest& m = result.manifest;
  m.config = cfg.to_json();
  m.template_digests = digests;
  m.dataset_digest = corpus.digest();
  m.context_digest = sha256_hex(prompt::context_to_json(context).dump());
  m.backend_fingerprint = backend_fingerprint(cfg.model, cfg.temperature, cfg.max_output_tokens, cfg.split_role_system);
  m.started_at = utc_now();
  m.inputs = corpus.size();

  const auto& responses = corpus.responses();
  std::vector<std::optional<RunRecord>> records(responses.size());
  std::vector<std::optional<RunFailure>> failures(responses.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex progress_mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= responses.size()) return;
      const auto& resp = responses[i];
      bool ok = false;
      try {
        records[i] = pipeline.process(resp);
        ok = true;
      } catch (const StageError& e) {
        failures[i] = RunFailure{resp.id, e.stage(), e.what()};
      } catch (const InvariantError& e) {
        failures[i] = RunFailure{resp.id, "finalize", std::string("internal error: ") + e.what()};
      }
      const std::size_t k = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(progress_mu);
        *progress << "[" << k << "/" << responses.size() << "] " << resp.id << (ok ? " ok" : " FAILED") << "\n";
      }
    }
  };

  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.concurrency),
                                                      std::max<std::size_t>(responses.size(), 1));
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (records[i]) result.records.push_back(std::move(*records[i]));
    if (failures[i]) m.failures.push_back(std::move(*failures[i]));
  }
  auto by_id = [](const auto& a, const auto& b) { return a.response_id < b.response_id; };
  std::sort(result.records.begin(), result.records.end(), by_id);
  std::sort(m.failures.begin(), m.failures.end(), by_id);
  m.succeeded = result.records.size();
  m.failed = m.failures.size();
  m.finished_at = utc_now();

  text::write_file(cfg.output_dir / kRecordsFileName, serialize_records(result.records));
  text::write_file(cfg.output_dir / kManifestFileName, m.to_json().dump(2) + "\n");
  return result;
}

// --- record files -----------------------------------------------------------

ordered_json record_to_json(const RunRecord& r) {
  ordered_json j;
  j["response_id"] = r.response_id;
  j["mode"] = to_string(r.mode);
  j["score_level"] = to_string(r.score_level);
  j["response_text"] = r.response_text;
  j["agent1_prompt"] = r.agent1_prompt;
  j["agent1_feedback"] = feedback_json(r.agent1_feedback);
  if (r.mode == RunMode::Multi) {
    j["agent2_prompt"] = r.agent2_prompt.value_or("");
    j["agent2_raw"] = r.agent2_raw.value_or("");
    ordered_json v;
    if (r.verdict) {
      v["decision"] = to_string(r.verdict->decision());
      v["reasons"] = r.verdict->reasons();
      ordered_json issues = ordered_json::array();
      for (auto k : r.verdict->detected_issues()) issues.push_back(to_string(k));
      v["detected_issues"] = issues;
      v["needs_review"] = r.verdict->needs_review();
      if (r.verdict->revised_feedback()) v["revised_feedback"] = feedback_json(*r.verdict->revised_feedback());
    }
    j["verdict"] = v;
  }
  j["final_feedback"] = feedback_json(r.final_feedback);
  j["over_word_limit"] = r.over_word_limit;
  ordered_json usage = ordered_json::array();
  for (const auto& u : r.token_usage) {
    ordered_json e;
    e["call"] = u.call;
    e["prompt_tokens"] = u.prompt_tokens;
    e["completion_tokens"] = u.completion_tokens;
    usage.push_back(e);
  }
  j["token_usage"] = usage;
  j["wall_time_ms"] = r.wall_time_ms;
  j["backend_fingerprint"] = r.backend_fingerprint;
  if (!r.earlier_rounds.empty()) {
    ordered_json rounds = ordered_json::array();
    for (const auto& er : r.earlier_rounds) {
      ordered_json e;
      e["agent1_raw"] = er.agent1_raw;
      e["agent2_raw"] = er.agent2_raw;
      rounds.push_back(e);
    }
    j["earlier_rounds"] = rounds;
  }
  return j;
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  try {
    r.response_id = j.at("response_id").get<std::string>();
    auto mode = parse_run_mode(j.at("mode").get<std::string>());
    if (!mode) throw InputError("unknown mode " + j.at("mode").dump());
    r.mode = *mode;
    auto level = parse_score_level(j.at("score_level").get<std::string>());
    if (!level) throw InputError("unknown score level " + j.at("score_level").dump());
    r.score_level = *level;
    r.response_text = j.at("response_text").get<std::string>();
    r.agent1_prompt = j.at("agent1_prompt").get<std::string>();
    r.agent1_feedback = feedback_from_json(j.at("agent1_feedback"), "agent1_feedback");
    if (j.contains("agent2_prompt")) r.agent2_prompt = j["agent2_prompt"].get<std::string>();
    if (j.contains("agent2_raw")) r.agent2_raw = j["agent2_raw"].get<std::string>();
    if (j.contains("verdict")) {
      const auto& v = j["verdict"];
      IssueSet issues;
      for (const auto& s : v.at("detected_issues")) {
        auto k = parse_issue_kind(s.get<std::string>());
        if (!k) throw InputError("unknown issue " + s.dump());
        issues.insert(*k);
      }
      auto decision = parse_decision(v.at("decision").get<std::string>());
      if (!decision) throw InputError("unknown decision " + v.at("decision").dump());
      std::string reasons = v.at("reasons").get<std::string>();
      if (*decision == Decision::GoodEnough) {
        r.verdict = ValidationVerdict::good_enough(std::move(reasons), std::move(issues));
      } else {
        if (!v.contains("revised_feedback")) throw InvariantError("revised verdict without revised feedback");
        r.verdict = ValidationVerdict::revised(std::move(reasons), std::move(issues),
                                               feedback_from_json(v["revised_feedback"], "revised_feedback"),
                                               v.value("needs_review", false));
      }
    }
    r.final_feedback = feedback_from_json(j.at("final_feedback"), "final_feedback");
    r.over_word_limit = j.at("over_word_limit").get<bool>();
    for (const auto& u : j.at("token_usage")) {
      r.token_usage.push_back({u.at("call").get<std::string>(), u.at("prompt_tokens").get<std::int64_t>(),
                               u.at("completion_tokens").get<std::int64_t>()});
    }
    r.wall_time_ms = j.at("wall_time_ms").get<std::int64_t>();
    r.backend_fingerprint = j.at("backend_fingerprint").get<std::string>();
    if (j.contains("earlier_rounds")) {
      for (const auto& e : j["earlier_rounds"]) {
        r.earlier_rounds.push_back({e.at("agent1_raw").get<std::string>(), e.at("agent2_raw").get<std::string>()});
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed run record: ") + e.what());
  }
  r.validate();
  return r;
}

std::string serialize_records(const std::vector<RunRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<RunRecord> parse_records(std::string_view jsonl, const std::string& source) {
  std::vector<RunRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line.text).empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line.text)));
    } catch (const json::exception& e) {
      throw InputError(source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw InputError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RunRecord> read_run_file(const std::filesystem::path& path) {
  auto file = std::filesystem::is_directory(path) ? path / kRecordsFileName : path;
  if (!std::filesystem::is_regular_file(file)) throw InputError("run file not found: " + file.string());
  return parse_records(text::read_file(file), file.string());
}

}  // namespace autofeedback::pipeline
