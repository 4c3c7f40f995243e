#include "autofeedback/llm_client.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "autofeedback/digest.hpp"
#include "autofeedback/text_util.hpp"

namespace autofeedback::llm {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

namespace {

Role parse_role(const std::string& s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw InputError("unknown chat role '" + s + "'");
}

std::string excerpt(const std::string& body, std::size_t limit = 200) {
  return body.size() <= limit ? body : body.substr(0, limit) + "...";
}

}  // namespace

ChatRequest::ChatRequest(std::string model, std::vector<ChatMessage> messages, double temperature,
                         int max_output_tokens)
    : model_(std::move(model)),
      messages_(std::move(messages)),
      temperature_(temperature),
      max_output_tokens_(max_output_tokens) {
  if (messages_.empty()) throw InputError("chat request needs at least one message");
  if (!(temperature_ >= 0.0 && temperature_ <= 2.0)) throw InputError("temperature must lie in [0, 2]");
  if (max_output_tokens_ <= 0) throw InputError("max_output_tokens must be positive");
  digest_ = sha256_hex(to_json().dump());
}

json ChatRequest::to_json() const {
  json msgs = json::array();
  for (const auto& m : messages_) msgs.push_back({{"content", m.content}, {"role", to_string(m.role)}});
  return {{"max_output_tokens", max_output_tokens_},
          {"messages", msgs},
          {"model", model_},
          {"temperature", temperature_}};
}

ChatRequest ChatRequest::from_json(const json& j) {
  std::vector<ChatMessage> msgs;
  for (const auto& m : j.at("messages")) {
    msgs.push_back({parse_role(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  }
  return ChatRequest(j.at("model").get<std::string>(), std::move(msgs), j.at("temperature").get<double>(),
                     j.at("max_output_tokens").get<int>());
}

json ChatResponse::to_json() const {
  return {{"completion_tokens", completion_tokens},
          {"latency_ms", latency_ms},
          {"prompt_tokens", prompt_tokens},
          {"text", text}};
}

ChatResponse ChatResponse::from_json(const json& j) {
  ChatResponse r;
  r.text = j.at("text").get<std::string>();
  r.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  r.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  r.latency_ms = j.value("latency_ms", std::int64_t{0});
  return r;
}

std::string_view to_string(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::NonRetryable: return "non-retryable";
    case BackendErrorKind::RetryExhausted: return "retryable-exhausted";
    case BackendErrorKind::CacheMiss: return "cache-miss";
    case BackendErrorKind::NoFixture: return "no-fixture";
  }
  return "";
}

// --- mock -------------------------------------------------------------------

MockBackend::MockBackend(std::map<std::string, std::string> fixtures, std::shared_ptr<ChatBackend> fallback)
    : fixtures_(std::move(fixtures)), fallback_(std::move(fallback)) {}

std::map<std::string, std::string> MockBackend::load_fixtures(const std::filesystem::path& path) {
  try {
    return json::parse(text::read_file(path)).get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw InputError("mock fixtures " + path.string() + ": " + e.what());
  }
}

ChatResponse MockBackend::complete(const ChatRequest& req) {
  auto it = fixtures_.find(req.digest());
  if (it != fixtures_.end()) return ChatResponse{it->second, 0, 0, 0};
  if (fallback_) return fallback_->complete(req);
  throw BackendError(BackendErrorKind::NoFixture, 0, "mock backend has no fixture for request " + req.digest());
}

// --- limiter ----------------------------------------------------------------

ConcurrencyLimiter::ConcurrencyLimiter(int limit) : limit_(limit) {
  if (limit_ < 1) throw InputError("concurrency limit must be at least 1");
}

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_use_ < limit_; });
  ++in_use_;
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_use_;
  }
  cv_.notify_one();
}

// --- live -------------------------------------------------------------------

json wire_request_body(const ChatRequest& req, const std::string& max_tokens_field) {
  json msgs = json::array();
  for (const auto& m : req.messages()) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {{"model", req.model()},
          {"messages", msgs},
          {"temperature", req.temperature()},
          {max_tokens_field, req.max_output_tokens()}};
}

ChatResponse parse_wire_response(const std::string& body) {
  try {
    auto j = json::parse(body);
    ChatResponse r;
    const auto& content = j.at("choices").at(0).at("message").at("content");
    r.text = content.is_null() ? "" : content.get<std::string>();
    if (j.contains("usage") && j["usage"].is_object()) {
      r.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
      r.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
    }
    return r;
  } catch (const json::exception& e) {
    throw BackendError(BackendErrorKind::NonRetryable, 200,
                       std::string("malformed chat-completion response: ") + e.what() + " body: " + excerpt(body));
  }
}

HttpChatBackend::HttpChatBackend(std::unique_ptr<HttpTransport> transport, HttpBackendOptions options)
    : transport_(std::move(transport)),
      options_(std::move(options)),
      limiter_(options_.max_in_flight),
      rng_(options_.jitter_seed) {
  if (!transport_) throw InputError("http backend needs a transport");
  if (options_.retry.max_attempts < 1) throw InputError("retry policy needs at least one attempt");
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::milliseconds HttpChatBackend::backoff(int attempt) {
  double cap = static_cast<double>(options_.retry.base_delay.count()) * std::pow(options_.retry.factor, attempt - 1);
  cap = std::min(cap, static_cast<double>(options_.retry.max_delay.count()));
  std::lock_guard lock(rng_mu_);
  // Full jitter: uniform in [0, cap].
  double unit = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return std::chrono::milliseconds(static_cast<std::int64_t>(unit * cap));
}

ChatResponse HttpChatBackend::complete(const ChatRequest& req) {
  const std::string body = wire_request_body(req, options_.max_tokens_field).dump();
  std::vector<std::pair<std::string, std::string>> headers = {{"Content-Type", "application/json"}};
  if (!options_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + options_.api_key);

  const auto started = std::chrono::steady_clock::now();
  std::string last_failure;
  int last_status = 0;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      retries_.fetch_add(1);
      options_.sleep(backoff(attempt - 1));
    }
    HttpResult result;
    {
      ConcurrencyLimiter::Permit permit(limiter_);
      requests_.fetch_add(1);
      result = transport_->post(options_.path, headers, body);
    }
    last_status = result.status;
    if (result.status >= 200 && result.status < 300) {
      ChatResponse resp = parse_wire_response(result.body);
      resp.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
      return resp;
    }
    if (result.status == 0) {
      last_failure = "transport failure: " + result.error;
      continue;
    }
    if (result.status == 429 || result.status >= 500) {
      last_failure = "HTTP " + std::to_string(result.status) + ": " + excerpt(result.body);
      continue;
    }
    throw BackendError(BackendErrorKind::NonRetryable, result.status,
                       "HTTP " + std::to_string(result.status) + ": " + excerpt(result.body));
  }
  throw BackendError(BackendErrorKind::RetryExhausted, last_status,
                     "retryable-exhausted after " + std::to_string(options_.retry.max_attempts) +
                         " attempts; last failure " + last_failure);
}

// --- cache ------------------------------------------------------------------

ReplayCache::ReplayCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ReplayCache::entry_path(const std::string& digest) const { return dir_ / (digest + ".json"); }

std::optional<ChatResponse> ReplayCache::replay(const ChatRequest& req) const {
  auto path = entry_path(req.digest());
  std::string content;
  {
    std::lock_guard lock(mu_);
    if (!std::filesystem::exists(path)) return std::nullopt;
    content = text::read_file(path);
  }
  json entry;
  try {
    entry = json::parse(content);
  } catch (const json::exception& e) {
    throw IntegrityError("cache entry " + path.string() + " is not valid JSON: " + e.what());
  }
  if (entry.at("request") != req.to_json()) {
    throw IntegrityError("cache entry " + path.string() + " holds a different request under the same digest");
  }
  return ChatResponse::from_json(entry.at("response"));
}

void ReplayCache::record(const ChatRequest& req, const ChatResponse& resp) {
  auto path = entry_path(req.digest());
  json entry = {{"digest", req.digest()}, {"request", req.to_json()}, {"response", resp.to_json()}};
  std::lock_guard lock(mu_);
  if (std::filesystem::exists(path)) {
    auto existing = json::parse(text::read_file(path), nullptr, false);
    if (existing.is_discarded() || !existing.contains("request") || existing.at("request") != req.to_json()) {
      throw IntegrityError("digest collision for " + req.digest() + ": stored request differs");
    }
  }
  text::write_file(path, entry.dump(2) + "\n");
}

std::string_view to_string(CacheMode mode) {
  switch (mode) {
    case CacheMode::Off: return "off";
    case CacheMode::Record: return "record";
    case CacheMode::Replay: return "replay";
    case CacheMode::ReplayOrRecord: return "replay-or-record";
  }
  return "off";
}

CachingBackend::CachingBackend(std::shared_ptr<ReplayCache> cache, CacheMode mode, std::shared_ptr<ChatBackend> inner)
    : cache_(std::move(cache)), mode_(mode), inner_(std::move(inner)) {
  if (mode_ != CacheMode::Off && !cache_) throw InputError("cache mode " + std::string(to_string(mode_)) + " needs a cache");
  if (mode_ != CacheMode::Replay && !inner_) throw InputError("cache mode " + std::string(to_string(mode_)) + " needs a backend");
}

ChatResponse CachingBackend::complete(const ChatRequest& req) {
  switch (mode_) {
    case CacheMode::Off:
      return inner_->complete(req);
    case CacheMode::Replay: {
      if (auto hit = cache_->replay(req)) return *hit;
      throw BackendError(BackendErrorKind::CacheMiss, 0, "strict replay: no cache entry for request " + req.digest());
    }
    case CacheMode::ReplayOrRecord:
      if (auto hit = cache_->replay(req)) return *hit;
      [[fallthrough]];
    case CacheMode::Record: {
      ChatResponse resp = inner_->complete(req);
      cache_->record(req, resp);
      return resp;
    }
  }
  return inner_->complete(req);
}

}  // namespace autofeedback::llm
