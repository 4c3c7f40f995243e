#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>

#include "autofeedback/llm_client.hpp"
#include "autofeedback/text_util.hpp"

namespace testsupport {

inline std::filesystem::path data_dir() { return AUTOFEEDBACK_DATA_DIR; }
inline std::filesystem::path test_dir() { return AUTOFEEDBACK_TEST_DIR; }
inline std::filesystem::path fixtures_dir() { return data_dir() / "fixtures"; }

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "af") {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Backend wrapper that counts calls and can fail selected requests.
class CountingBackend : public autofeedback::llm::ChatBackend {
 public:
  using Hook = std::function<void(const autofeedback::llm::ChatRequest&)>;

  explicit CountingBackend(autofeedback::llm::ChatBackend& inner, Hook before = {})
      : inner_(inner), before_(std::move(before)) {}

  autofeedback::llm::ChatResponse complete(const autofeedback::llm::ChatRequest& req) override {
    calls_.fetch_add(1);
    if (before_) before_(req);
    return inner_.complete(req);
  }
  int calls() const { return calls_.load(); }

 private:
  autofeedback::llm::ChatBackend& inner_;
  Hook before_;
  std::atomic<int> calls_{0};
};

/// Backend answering from a function of the joined prompt text.
class FnBackend : public autofeedback::llm::ChatBackend {
 public:
  using Fn = std::function<std::string(const std::string& prompt)>;
  explicit FnBackend(Fn fn) : fn_(std::move(fn)) {}

  autofeedback::llm::ChatResponse complete(const autofeedback::llm::ChatRequest& req) override {
    std::string prompt;
    for (const auto& m : req.messages()) prompt += m.content + "\n";
    autofeedback::llm::ChatResponse r;
    r.text = fn_(prompt);
    r.prompt_tokens = static_cast<std::int64_t>(prompt.size() / 4);
    r.completion_tokens = static_cast<std::int64_t>(r.text.size() / 4);
    r.latency_ms = 3;
    return r;
  }

 private:
  Fn fn_;
};

inline bool is_agent2_prompt(const std::string& prompt) {
  return prompt.find("<<FEEDBACK FROM AGENT1>>") != std::string::npos;
}

inline std::string read(const std::filesystem::path& p) { return autofeedback::text::read_file(p); }

}  // namespace testsupport
