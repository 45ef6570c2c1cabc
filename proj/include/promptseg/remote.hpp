#pragma once

#include <chrono>
#include <memory>
#include <string>

#include <json.hpp>

#include "promptseg/responder.hpp"
#include "promptseg/segmenter.hpp"

namespace promptseg {

struct RemoteOptions {
  std::string url;  ///< e.g. "http://127.0.0.1:8080"
  /// Upper bound on concurrent requests; also the connection pool size.
  int max_in_flight = 4;
  /// Extra attempts after a retryable failure.
  int max_retries = 3;
  /// Delay before retry n is backoff_base * 2^(n-1).
  std::chrono::milliseconds backoff_base{100};
  std::chrono::seconds timeout{60};
};

class HttpPool;

/// Segmenter backed by a service speaking
///   POST /v1/segment {"image": b64 PNG | "image_id", "box": [x1,y1,x2,y2],
///                     "points": [[x,y,1|0], ...]}
///   -> {"mask": {"size": [h,w], "counts": [...]}, "score": s}
/// with errors as {"error": {"code", "message", "retryable"}}. Coordinates on
/// the wire are pixels.
class RemoteSegmenter final : public Segmenter {
 public:
  explicit RemoteSegmenter(RemoteOptions options);
  ~RemoteSegmenter() override;

  SegmentResult segment(const SegmentRequest& request) override;

  /// GET /v1/health answered {"status": "ok"}.
  bool healthy();
  /// Any HTTP answer at all from the service.
  bool reachable();

  static nlohmann::json request_json(const SegmentRequest& request);

 private:
  RemoteOptions options_;
  std::unique_ptr<HttpPool> pool_;
};

/// Responder backed by POST /v1/chat {"id", "image_id", "turns": [{"role",
/// "text"}]} -> {"text": str, "token_confidences": [floats]}.
class RemoteResponder final : public Responder {
 public:
  explicit RemoteResponder(RemoteOptions options);
  ~RemoteResponder() override;

  Reply respond(const RESample& sample, std::span<const Turn> turns) override;
  /// Any HTTP answer at all from the service.
  bool reachable();

 private:
  RemoteOptions options_;
  std::unique_ptr<HttpPool> pool_;
};

/// Standard base64 of raw bytes.
std::string base64_encode(std::string_view bytes);

}  // namespace promptseg
