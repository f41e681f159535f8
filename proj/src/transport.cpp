#include "chatdit/transport.hpp"

#include <httplib.h>

#include "chatdit/errors.hpp"

namespace chatdit {

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL '" + url + "' has no scheme");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("URL '" + url + "' must use http or https");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  UrlParts parts;
  parts.scheme_host_port = url.substr(0, path_start);
  parts.path = path_start == std::string::npos ? "/" : url.substr(path_start);
  if (parts.scheme_host_port.size() <= scheme_end + 3) {
    throw ConfigError("URL '" + url + "' has no host");
  }
  return parts;
}

HttpResponse HttplibTransport::post(const std::string& url, const HttpHeaders& headers,
                                    const std::string& body, const std::string& content_type,
                                    std::chrono::milliseconds timeout) {
  const UrlParts parts = split_url(url);
  httplib::Client client(parts.scheme_host_port);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count());
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count());
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count());
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);
  auto result = client.Post(parts.path, hdrs, body, content_type);
  if (!result) {
    throw BackendError("POST " + url + " failed: " + httplib::to_string(result.error()), true);
  }
  return {result->status, result->body};
}

HttpResponse RecordingTransport::post(const std::string& url, const HttpHeaders& headers,
                                      const std::string& body, const std::string& content_type,
                                      std::chrono::milliseconds timeout) {
  ++count_;
  if (!inner_) throw BackendError("network access is disabled (POST " + url + ")", false);
  return inner_->post(url, headers, body, content_type, timeout);
}

}  // namespace chatdit
