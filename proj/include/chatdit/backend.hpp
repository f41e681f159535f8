#pragma once

// Diffusion backend wire protocol:
//
//   POST {base}/v1/generate
//   {prompt, width, height, seed, num_inference_steps, guidance,
//    canvas_png_b64?, mask_png_b64?}
//   -> 200 {image_png_b64, backend_id, elapsed_ms}
//   -> 400 bad request, 503 busy (retryable)
//
// Mask pixels: 255 = generate, 0 = keep. No canvas means plain
// text-to-image at width x height.

#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chatdit/hash.hpp"
#include "chatdit/image.hpp"
#include "chatdit/model.hpp"
#include "chatdit/transport.hpp"

namespace chatdit {

inline constexpr int kDefaultInferenceSteps = 28;
inline constexpr double kDefaultGuidance = 3.5;

struct BackendRequest {
  std::string prompt;
  int width = 0;
  int height = 0;
  std::uint64_t seed = 0;
  int num_inference_steps = kDefaultInferenceSteps;
  double guidance = kDefaultGuidance;
  std::optional<Bytes> canvas_png;
  std::optional<Bytes> mask_png;

  /// Structural checks only (no PNG decoding). Throws ProtocolError.
  void validate() const;
};

struct BackendResponse {
  Bytes image_png;
  std::string backend_id;
  long long elapsed_ms = 0;
};

Json to_wire(const BackendRequest& request);
BackendRequest request_from_wire(const Json& body);
Json to_wire(const BackendResponse& response);
BackendResponse response_from_wire(const Json& body);

class DiffusionBackend {
 public:
  virtual ~DiffusionBackend() = default;
  /// Throws BackendError (transport, busy) or ProtocolError.
  virtual BackendResponse generate(const BackendRequest& request) = 0;
};

/// Deterministic stand-in: keep-masked pixels are copied from the canvas,
/// generated pixels come from a pattern keyed by (prompt hash, seed, x, y).
class MockDiffusionBackend final : public DiffusionBackend {
 public:
  BackendResponse generate(const BackendRequest& request) override;

  /// The next `count` calls throw a BackendError with the given retryability.
  void fail_next(int count, bool retryable = true);
  std::vector<BackendRequest> captured() const;
  std::size_t call_count() const;

  /// The generated-region color at (x, y) for a given prompt and seed.
  static void pattern_pixel(std::uint64_t prompt_hash, std::uint64_t seed, int x, int y,
                            std::uint8_t out[3]);

 private:
  mutable std::mutex mu_;
  std::vector<BackendRequest> captured_;
  int failures_left_ = 0;
  bool failures_retryable_ = true;
  std::size_t calls_ = 0;
};

struct RemoteBackendConfig {
  std::string base_url;
  std::chrono::milliseconds timeout{600000};

  /// Reads CHATDIT_BACKEND_URL; nullopt when unset.
  static std::optional<RemoteBackendConfig> from_env();
};

class HttpDiffusionBackend final : public DiffusionBackend {
 public:
  HttpDiffusionBackend(RemoteBackendConfig config, std::shared_ptr<HttpTransport> transport);
  BackendResponse generate(const BackendRequest& request) override;

 private:
  RemoteBackendConfig config_;
  std::shared_ptr<HttpTransport> transport_;
};

/// Server side of the protocol: maps a request body onto (status, body).
/// Lets any DiffusionBackend be exposed over HTTP.
std::pair<int, std::string> handle_generate(DiffusionBackend& backend, const std::string& body);

}  // namespace chatdit
