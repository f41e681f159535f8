#include "chatdit/server.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>

#include <httplib.h>

#include "chatdit/errors.hpp"

namespace chatdit {
namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, Json{{"error", message}});
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const BusyError& e) {
      send_error(res, 409, e.what());
    } catch (const InputError& e) {
      send_error(res, 400, e.what());
    } catch (const Json::exception& e) {
      send_error(res, 400, std::string("malformed JSON body: ") + e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

long long parse_seq(const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size() || v < -1) throw InputError("bad seq");
    return v;
  } catch (const std::logic_error&) {
    throw InputError("invalid event cursor: " + text);
  }
}

int parse_turn_index(const std::string& text) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size() || v < 0) throw NotFoundError("no turn " + text);
    return v;
  } catch (const std::logic_error&) {
    throw NotFoundError("no turn " + text);
  }
}

Bytes to_bytes(const std::string& s) { return Bytes(s.begin(), s.end()); }

}  // namespace

ServerConfig ServerConfig::from_env() {
  ServerConfig c;
  const char* addr = std::getenv("CHATDIT_BIND_ADDR");
  if (!addr || !*addr) return c;
  const std::string text = addr;
  const auto colon = text.rfind(':');
  try {
    if (colon == std::string::npos) {
      c.host = text;
    } else {
      if (colon > 0) c.host = text.substr(0, colon);
      c.port = std::stoi(text.substr(colon + 1));
    }
  } catch (const std::exception&) {
    throw ConfigError("CHATDIT_BIND_ADDR must look like host:port, got " + text);
  }
  if (c.port < 0 || c.port > 65535) throw ConfigError("port out of range in CHATDIT_BIND_ADDR");
  return c;
}

struct ApiServer::Impl {
  SessionManager& manager;
  ServerConfig config;
  httplib::Server http;
  std::atomic<bool> stopping{false};

  Impl(SessionManager& m, ServerConfig c) : manager(m), config(std::move(c)) { routes(); }

  void routes() {
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

    http.Post("/api/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, 201, Json{{"id", manager.create_session().id}});
    }));

    http.Get("/api/sessions/:id", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, 200, Json(manager.snapshot(req.path_params.at("id"))));
    }));

    http.Post("/api/sessions/:id/images",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                std::string body;
                if (req.is_multipart_form_data()) {
                  if (req.files.empty()) throw InputError("multipart body carries no file");
                  body = req.has_file("file") ? req.get_file_value("file").content
                                              : req.files.begin()->second.content;
                } else {
                  body = req.body;
                }
                if (body.empty()) throw InputError("empty image upload");
                const Bytes bytes = to_bytes(body);
                send_json(res, 201, Json(manager.upload_image(req.path_params.at("id"), bytes)));
              }));

    http.Post("/api/sessions/:id/messages",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                const Json body = Json::parse(req.body);
                if (!body.is_object() || !body.contains("text") || !body.at("text").is_string()) {
                  throw InputError("body must be an object with a string 'text'");
                }
                std::vector<std::string> ids;
                if (body.contains("image_ids") && !body.at("image_ids").is_null()) {
                  ids = body.at("image_ids").get<std::vector<std::string>>();
                }
                TurnMode mode = TurnMode::images;
                const std::string m = body.value("mode", std::string("images"));
                if (m == "article") {
                  mode = TurnMode::article;
                } else if (m != "images") {
                  throw InputError("mode must be 'images' or 'article'");
                }
                const int turn = manager.submit_turn(req.path_params.at("id"),
                                                     body.at("text").get<std::string>(), ids, mode);
                send_json(res, 202, Json{{"turn", turn}});
              }));

    http.Get("/api/sessions/:id/turns/:turn/events",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const int turn = parse_turn_index(req.path_params.at("turn"));
               auto log = manager.events(req.path_params.at("id"), turn);
               long long after = -1;
               if (req.has_param("after")) {
                 after = parse_seq(req.get_param_value("after"));
               } else if (req.has_header("Last-Event-ID")) {
                 after = parse_seq(req.get_header_value("Last-Event-ID"));
               }
               res.status = 200;
               res.set_header("Cache-Control", "no-cache");
               auto cursor = std::make_shared<long long>(after);
               res.set_chunked_content_provider(
                   "text/event-stream", [this, log, cursor](std::size_t, httplib::DataSink& sink) {
                     if (stopping) return false;
                     const auto batch = log->wait_after(*cursor, config.keepalive);
                     if (batch.empty()) {
                       if (log->closed()) {
                         sink.done();
                         return true;
                       }
                       static const std::string kKeepalive = ": keepalive\n\n";
                       return sink.write(kKeepalive.data(), kKeepalive.size());
                     }
                     for (const auto& event : batch) {
                       const std::string frame = sse_frame(event);
                       if (!sink.write(frame.data(), frame.size())) return false;
                       *cursor = event.seq;
                     }
                     if (batch.back().terminal()) sink.done();
                     return true;
                   });
             }));

    http.Get("/api/images/:key", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Bytes bytes = manager.blob_bytes(req.path_params.at("key"));
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    }));

    http.Get("/api/images/:sid/:iid", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Bytes bytes = manager.image_bytes(req.path_params.at("sid"), req.path_params.at("iid"));
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    }));

    http.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status, "no such endpoint");
    });
  }
};

ApiServer::ApiServer(SessionManager& manager, ServerConfig config)
    : impl_(std::make_unique<Impl>(manager, std::move(config))) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  auto& c = impl_->config;
  if (c.port == 0) {
    c.port = impl_->http.bind_to_any_port(c.host);
    if (c.port < 0) throw ConfigError("cannot bind " + c.host);
  } else if (!impl_->http.bind_to_port(c.host, c.port)) {
    throw ConfigError("cannot bind " + c.host + ":" + std::to_string(c.port));
  }
  return c.port;
}

void ApiServer::serve() { impl_->http.listen_after_bind(); }

void ApiServer::stop() {
  impl_->stopping = true;
  impl_->http.stop();
}

void ApiServer::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace chatdit
