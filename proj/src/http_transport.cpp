#include <httplib.h>

#include "autofeedback/llm_client.hpp"

namespace autofeedback::llm {

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(std::string base_url, int timeout_seconds)
      : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {
    if (!httplib::Client(base_url_).is_valid()) throw InputError("invalid backend base URL '" + base_url_ + "'");
  }

  HttpResult post(const std::string& path, const std::vector<std::pair<std::string, std::string>>& headers,
                  const std::string& body) override {
    // One client per call: httplib::Client must not be shared across threads.
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    client.set_write_timeout(timeout_seconds_, 0);
    httplib::Headers h;
    std::string content_type = "application/json";
    for (const auto& [k, v] : headers) {
      if (k == "Content-Type") content_type = v;
      else h.emplace(k, v);
    }
    auto res = client.Post(path, h, body, content_type);
    if (!res) return HttpResult{0, "", httplib::to_string(res.error())};
    return HttpResult{res->status, res->body, ""};
  }

 private:
  std::string base_url_;
  int timeout_seconds_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& base_url, int timeout_seconds) {
  return std::make_unique<HttplibTransport>(base_url, timeout_seconds);
}

}  // namespace autofeedback::llm
