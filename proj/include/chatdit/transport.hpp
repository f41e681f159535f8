#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace chatdit {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Outbound HTTP. Implementations throw BackendError (retryable) when no
/// response arrives at all.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const HttpHeaders& headers,
                            const std::string& body, const std::string& content_type,
                            std::chrono::milliseconds timeout) = 0;
};

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                    const std::string& content_type, std::chrono::milliseconds timeout) override;
};

/// Counts requests before forwarding them. With no inner transport every
/// request fails, which makes it a tripwire for code that must stay offline.
class RecordingTransport final : public HttpTransport {
 public:
  explicit RecordingTransport(std::shared_ptr<HttpTransport> inner = nullptr)
      : inner_(std::move(inner)) {}

  HttpResponse post(const std::string& url, const HttpHeaders& headers, const std::string& body,
                    const std::string& content_type, std::chrono::milliseconds timeout) override;
  std::size_t request_count() const noexcept { return count_.load(); }

 private:
  std::shared_ptr<HttpTransport> inner_;
  std::atomic<std::size_t> count_{0};
};

struct UrlParts {
  std::string scheme_host_port;  // "https://api.example.com:443"
  std::string path;              // "/v1/chat/completions"
};

/// Splits an absolute http(s) URL. Throws ConfigError.
UrlParts split_url(const std::string& url);

}  // namespace chatdit
