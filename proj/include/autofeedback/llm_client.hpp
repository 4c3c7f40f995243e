#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "autofeedback/error.hpp"

namespace autofeedback::llm {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

inline constexpr double kDefaultTemperature = 0.0;
inline constexpr int kDefaultMaxOutputTokens = 1024;

/// An immutable chat-completion request. The digest is a SHA-256 over the
/// canonical JSON form, so it depends on nothing but the four fields.
class ChatRequest {
 public:
  ChatRequest(std::string model, std::vector<ChatMessage> messages, double temperature = kDefaultTemperature,
              int max_output_tokens = kDefaultMaxOutputTokens);

  const std::string& model() const { return model_; }
  const std::vector<ChatMessage>& messages() const { return messages_; }
  double temperature() const { return temperature_; }
  int max_output_tokens() const { return max_output_tokens_; }
  const std::string& digest() const { return digest_; }

  nlohmann::json to_json() const;
  static ChatRequest from_json(const nlohmann::json& j);

 private:
  std::string model_;
  std::vector<ChatMessage> messages_;
  double temperature_;
  int max_output_tokens_;
  std::string digest_;
};

struct ChatResponse {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t latency_ms = 0;

  nlohmann::json to_json() const;
  static ChatResponse from_json(const nlohmann::json& j);
  friend bool operator==(const ChatResponse&, const ChatResponse&) = default;
};

enum class BackendErrorKind {
  NonRetryable,    // 4xx other than 429, malformed body
  RetryExhausted,  // transient failures outlasted the retry budget
  CacheMiss,       // strict replay had no entry
  NoFixture,       // mock had nothing for the digest
};

std::string_view to_string(BackendErrorKind kind);

class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, int status, const std::string& message)
      : Error(message), kind_(kind), status_(status) {}

  BackendErrorKind kind() const { return kind_; }
  int status() const { return status_; }
  bool retryable_exhausted() const { return kind_ == BackendErrorKind::RetryExhausted; }

 private:
  BackendErrorKind kind_;
  int status_;
};

/// Blocking completion interface. Implementations are safe for concurrent use.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& req) = 0;
};

/// Deterministic table lookup keyed by request digest. Misses go to
/// `fallback` when one is given, otherwise they raise BackendError(NoFixture).
class MockBackend : public ChatBackend {
 public:
  explicit MockBackend(std::map<std::string, std::string> fixtures,
                       std::shared_ptr<ChatBackend> fallback = nullptr);

  /// Fixture file: JSON object mapping request digest to completion text.
  static std::map<std::string, std::string> load_fixtures(const std::filesystem::path& path);

  ChatResponse complete(const ChatRequest& req) override;

 private:
  std::map<std::string, std::string> fixtures_;
  std::shared_ptr<ChatBackend> fallback_;
};

/// Counting limiter for in-flight requests.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(int limit);

  class Permit {
   public:
    explicit Permit(ConcurrencyLimiter& owner) : owner_(&owner) { owner_->acquire(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    ~Permit() { owner_->release(); }

   private:
    ConcurrencyLimiter* owner_;
  };

  void acquire();
  void release();
  int limit() const { return limit_; }

 private:
  int limit_;
  int in_use_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

struct HttpResult {
  int status = 0;     // 0 when the request never completed
  std::string body;
  std::string error;  // transport failure description (timeout, refused, ...)
};

/// Minimal POST transport so tests can script responses and count calls.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post(const std::string& path, const std::vector<std::pair<std::string, std::string>>& headers,
                          const std::string& body) = 0;
};

/// cpp-httplib transport for `base_url` ("https://host[:port]").
std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url, int timeout_seconds);

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
  std::chrono::milliseconds max_delay{60000};
};

struct HttpBackendOptions {
  std::string path = "/v1/chat/completions";
  std::string api_key;  // sent as a bearer token; never persisted
  std::string max_tokens_field = "max_tokens";
  RetryPolicy retry;
  int max_in_flight = 8;
  std::uint64_t jitter_seed = 0x5eed;
  /// Replaceable so tests do not wait out real backoff delays.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Live chat-completion client speaking the messages-array wire format.
///
/// Retries HTTP 429, 5xx and transport failures with exponential backoff and
/// full jitter; any other non-2xx status is terminal. At most
/// `max_in_flight` requests are outstanding at any time.
class HttpChatBackend : public ChatBackend {
 public:
  HttpChatBackend(std::unique_ptr<HttpTransport> transport, HttpBackendOptions options);

  ChatResponse complete(const ChatRequest& req) override;

  std::int64_t requests_sent() const { return requests_.load(); }
  std::int64_t retries() const { return retries_.load(); }

 private:
  std::chrono::milliseconds backoff(int attempt);

  std::unique_ptr<HttpTransport> transport_;
  HttpBackendOptions options_;
  ConcurrencyLimiter limiter_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
  std::atomic<std::int64_t> requests_{0};
  std::atomic<std::int64_t> retries_{0};
};

/// Request body sent by HttpChatBackend (exposed for tests).
nlohmann::json wire_request_body(const ChatRequest& req, const std::string& max_tokens_field);
/// Parses a chat-completion response body. Throws BackendError(NonRetryable).
ChatResponse parse_wire_response(const std::string& body);

/// One JSON file per request digest holding the canonical request and the
/// response. Safe for concurrent use.
class ReplayCache {
 public:
  explicit ReplayCache(std::filesystem::path dir);

  /// Stored response iff an entry with the same digest exists. Throws
  /// IntegrityError if the stored request differs from `req`.
  std::optional<ChatResponse> replay(const ChatRequest& req) const;
  /// Persists the pair. Throws IntegrityError on a digest collision with a
  /// different stored request.
  void record(const ChatRequest& req, const ChatResponse& resp);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path entry_path(const std::string& digest) const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

enum class CacheMode {
  Off,             // pass through
  Record,          // call the backend, store every exchange
  Replay,          // serve from the cache only; a miss is terminal
  ReplayOrRecord,  // serve hits, call and store misses
};

std::string_view to_string(CacheMode mode);

class CachingBackend : public ChatBackend {
 public:
  /// `inner` may be null in Replay mode.
  CachingBackend(std::shared_ptr<ReplayCache> cache, CacheMode mode, std::shared_ptr<ChatBackend> inner);

  ChatResponse complete(const ChatRequest& req) override;

 private:
  std::shared_ptr<ReplayCache> cache_;
  CacheMode mode_;
  std::shared_ptr<ChatBackend> inner_;
};

}  // namespace autofeedback::llm
