#pragma once

// HTTP facade over a SessionManager.
//
//   POST /api/sessions                          -> 201 {"id"}
//   GET  /api/sessions/{id}                     -> 200 session JSON
//   POST /api/sessions/{id}/images              -> 201 ImageRecord (multipart or raw body)
//   POST /api/sessions/{id}/messages            -> 202 {"turn"}
//   GET  /api/sessions/{id}/turns/{t}/events    -> text/event-stream, ?after=<seq>
//   GET  /api/images/{storage_key}              -> image/png
//   GET  /api/images/{session_id}/{image_id}    -> image/png

#include <memory>
#include <string>

#include "chatdit/orchestrator.hpp"

namespace chatdit {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::chrono::milliseconds keepalive{15000};

  /// CHATDIT_BIND_ADDR as "host:port" (or ":port").
  static ServerConfig from_env();
};

class ApiServer {
 public:
  ApiServer(SessionManager& manager, ServerConfig config = {});
  ~ApiServer();

  /// Binds (port 0 picks a free one) and returns the port.
  int bind();
  /// Serves until stop(); blocking.
  void serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace chatdit
