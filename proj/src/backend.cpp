#include "chatdit/backend.hpp"

#include <chrono>
#include <cstdlib>

#include "chatdit/errors.hpp"

namespace chatdit {
namespace {

Bytes decode_b64_field(const Json& body, const char* field) {
  try {
    return base64_decode(body.at(field).get<std::string>());
  } catch (const InputError& e) {
    throw ProtocolError(std::string(field) + ": " + e.what());
  }
}

}  // namespace

void BackendRequest::validate() const {
  if (width <= 0 || height <= 0 || width % 16 != 0 || height % 16 != 0) {
    throw ProtocolError("width and height must be positive multiples of 16");
  }
  if (mask_png && !canvas_png) throw ProtocolError("a mask requires a canvas");
  if (num_inference_steps < 1) throw ProtocolError("num_inference_steps must be positive");
}

Json to_wire(const BackendRequest& r) {
  Json j{{"prompt", r.prompt},
         {"width", r.width},
         {"height", r.height},
         {"seed", r.seed},
         {"num_inference_steps", r.num_inference_steps},
         {"guidance", r.guidance}};
  if (r.canvas_png) j["canvas_png_b64"] = base64_encode(*r.canvas_png);
  if (r.mask_png) j["mask_png_b64"] = base64_encode(*r.mask_png);
  return j;
}

BackendRequest request_from_wire(const Json& body) {
  BackendRequest r;
  try {
    body.at("prompt").get_to(r.prompt);
    body.at("width").get_to(r.width);
    body.at("height").get_to(r.height);
    body.at("seed").get_to(r.seed);
    r.num_inference_steps = body.value("num_inference_steps", kDefaultInferenceSteps);
    r.guidance = body.value("guidance", kDefaultGuidance);
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("malformed generate request: ") + e.what());
  }
  if (body.contains("canvas_png_b64")) r.canvas_png = decode_b64_field(body, "canvas_png_b64");
  if (body.contains("mask_png_b64")) r.mask_png = decode_b64_field(body, "mask_png_b64");
  r.validate();
  return r;
}

Json to_wire(const BackendResponse& r) {
  return Json{{"image_png_b64", base64_encode(r.image_png)},
              {"backend_id", r.backend_id},
              {"elapsed_ms", r.elapsed_ms}};
}

BackendResponse response_from_wire(const Json& body) {
  BackendResponse r;
  try {
    r.image_png = decode_b64_field(body, "image_png_b64");
    r.backend_id = body.value("backend_id", std::string{});
    r.elapsed_ms = body.value("elapsed_ms", 0LL);
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("malformed generate response: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Mock
// ---------------------------------------------------------------------------

void MockDiffusionBackend::pattern_pixel(std::uint64_t prompt_hash, std::uint64_t seed, int x,
                                         int y, std::uint8_t out[3]) {
  // 8x8 blocks of flat color keep generated canvases compressible.
  const std::uint64_t cell =
      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(y >> 3)) << 32) |
      static_cast<std::uint32_t>(x >> 3);
  const std::uint64_t h = mix64(prompt_hash ^ mix64(seed ^ mix64(cell)));
  out[0] = static_cast<std::uint8_t>(h);
  out[1] = static_cast<std::uint8_t>(h >> 8);
  out[2] = static_cast<std::uint8_t>(h >> 16);
}

BackendResponse MockDiffusionBackend::generate(const BackendRequest& request) {
  const auto started = std::chrono::steady_clock::now();
  {
    std::lock_guard lock(mu_);
    ++calls_;
    captured_.push_back(request);
    if (failures_left_ > 0) {
      --failures_left_;
      throw BackendError("mock backend is busy", failures_retryable_);
    }
  }
  request.validate();

  std::optional<Image> canvas;
  std::optional<GrayImage> mask;
  try {
    if (request.canvas_png) canvas = decode_image(*request.canvas_png);
    if (request.mask_png) mask = decode_png_gray(*request.mask_png);
  } catch (const InputError& e) {
    throw ProtocolError(std::string("mock backend cannot decode request image: ") + e.what());
  }
  if (canvas && (canvas->width != request.width || canvas->height != request.height)) {
    throw ProtocolError("canvas dimensions differ from the request");
  }
  if (mask && (mask->width != request.width || mask->height != request.height)) {
    throw ProtocolError("mask dimensions differ from the request");
  }

  const std::uint64_t prompt_hash = fnv1a64(request.prompt);
  Image out(request.width, request.height);
  for (int y = 0; y < request.height; ++y) {
    for (int x = 0; x < request.width; ++x) {
      std::uint8_t* px = out.at(x, y);
      // Without a mask the whole canvas is regenerated.
      const bool keep = canvas && mask && mask->at(x, y) < 128;
      if (keep) {
        const std::uint8_t* src = canvas->at(x, y);
        px[0] = src[0];
        px[1] = src[1];
        px[2] = src[2];
      } else {
        pattern_pixel(prompt_hash, request.seed, x, y, px);
      }
    }
  }
  BackendResponse response;
  response.image_png = encode_png(out);
  response.backend_id = "mock";
  response.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
  return response;
}

void MockDiffusionBackend::fail_next(int count, bool retryable) {
  std::lock_guard lock(mu_);
  failures_left_ = count;
  failures_retryable_ = retryable;
}

std::vector<BackendRequest> MockDiffusionBackend::captured() const {
  std::lock_guard lock(mu_);
  return captured_;
}

std::size_t MockDiffusionBackend::call_count() const {
  std::lock_guard lock(mu_);
  return calls_;
}

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------

std::optional<RemoteBackendConfig> RemoteBackendConfig::from_env() {
  const char* url = std::getenv("CHATDIT_BACKEND_URL");
  if (!url || !*url) return std::nullopt;
  RemoteBackendConfig c;
  c.base_url = url;
  while (!c.base_url.empty() && c.base_url.back() == '/') c.base_url.pop_back();
  return c;
}

HttpDiffusionBackend::HttpDiffusionBackend(RemoteBackendConfig config,
                                           std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  split_url(config_.base_url + "/v1/generate");
}

BackendResponse HttpDiffusionBackend::generate(const BackendRequest& request) {
  request.validate();
  const HttpResponse res = transport_->post(config_.base_url + "/v1/generate", {},
                                            to_wire(request).dump(), "application/json",
                                            config_.timeout);
  if (res.status == 503) throw BackendError("diffusion backend is busy (503)", true);
  if (res.status == 400) throw ProtocolError("diffusion backend rejected the request: " + res.body);
  if (res.status != 200) {
    throw BackendError("diffusion backend answered " + std::to_string(res.status),
                       res.status >= 500);
  }
  try {
    return response_from_wire(Json::parse(res.body));
  } catch (const Json::parse_error& e) {
    throw ProtocolError(std::string("diffusion backend reply is not JSON: ") + e.what());
  }
}

std::pair<int, std::string> handle_generate(DiffusionBackend& backend, const std::string& body) {
  auto error = [](int status, const std::string& message) {
    return std::pair<int, std::string>{status, Json{{"error", message}}.dump()};
  };
  try {
    const BackendRequest request = request_from_wire(Json::parse(body));
    return {200, to_wire(backend.generate(request)).dump()};
  } catch (const Json::parse_error& e) {
    return error(400, e.what());
  } catch (const ProtocolError& e) {
    return error(400, e.what());
  } catch (const BackendError& e) {
    return error(e.retryable() ? 503 : 500, e.what());
  }
}

}  // namespace chatdit
