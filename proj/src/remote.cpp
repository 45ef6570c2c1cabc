#include "promptseg/remote.hpp"

#include <condition_variable>
#include <mutex>
#include <thread>
#include <variant>
#include <vector>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <httplib.h>

#include "promptseg/errors.hpp"

namespace promptseg {

std::string base64_encode(std::string_view bytes) {
  using namespace boost::archive::iterators;
  using Encoder = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
  const std::size_t pad = (3 - bytes.size() % 3) % 3;
  std::string padded(bytes);
  padded.append(pad, '\0');
  std::string out(Encoder(padded.cbegin()), Encoder(padded.cend()));
  out.resize(out.size() - pad);
  out.append(pad, '=');
  return out;
}

/// Bounded set of keep-alive clients; acquire() blocks while all are in use.
class HttpPool {
 public:
  HttpPool(std::string url, int size, std::chrono::seconds timeout)
      : url_(std::move(url)), size_(std::max(1, size)), timeout_(timeout) {}

  class Lease {
   public:
    Lease(HttpPool& pool, std::unique_ptr<httplib::Client> client)
        : pool_(pool), client_(std::move(client)) {}
    ~Lease() { pool_.release(std::move(client_)); }
    Lease(const Lease&) = delete;
    Lease& operator=(const Lease&) = delete;
    httplib::Client& operator*() { return *client_; }
    httplib::Client* operator->() { return client_.get(); }

   private:
    HttpPool& pool_;
    std::unique_ptr<httplib::Client> client_;
  };

  Lease acquire() {
    std::unique_lock lock(mutex_);
    available_.wait(lock, [&] { return !idle_.empty() || created_ < size_; });
    if (!idle_.empty()) {
      auto c = std::move(idle_.back());
      idle_.pop_back();
      return Lease(*this, std::move(c));
    }
    ++created_;
    lock.unlock();
    auto c = std::make_unique<httplib::Client>(url_);
    c->set_keep_alive(true);
    c->set_connection_timeout(timeout_);
    c->set_read_timeout(timeout_);
    c->set_write_timeout(timeout_);
    return Lease(*this, std::move(c));
  }

 private:
  void release(std::unique_ptr<httplib::Client> c) {
    {
      std::lock_guard lock(mutex_);
      idle_.push_back(std::move(c));
    }
    available_.notify_one();
  }

  std::string url_;
  int size_;
  std::chrono::seconds timeout_;
  std::mutex mutex_;
  std::condition_variable available_;
  std::vector<std::unique_ptr<httplib::Client>> idle_;
  int created_ = 0;
};

namespace {

struct RemoteFailure {
  std::string code;
  std::string message;
  bool retryable = false;
};

/// One POST; either the parsed 200 body or a failure description.
std::variant<nlohmann::json, RemoteFailure> post_once(HttpPool& pool, const std::string& path,
                                                      const std::string& body) {
  auto client = pool.acquire();
  auto res = client->Post(path, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const bool unreachable = err == httplib::Error::Connection;
    return RemoteFailure{unreachable ? "unreachable" : "transport", httplib::to_string(err), true};
  }
  nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
  if (res->status != 200) {
    RemoteFailure f{"http_" + std::to_string(res->status), res->body,
                    res->status >= 500 || res->status == 429};
    if (!j.is_discarded() && j.is_object() && j.contains("error") && j["error"].is_object()) {
      const auto& e = j["error"];
      f.code = e.value("code", f.code);
      f.message = e.value("message", f.message);
      f.retryable = e.value("retryable", f.retryable);
    }
    return f;
  }
  if (j.is_discarded()) return RemoteFailure{"bad_response", "response is not JSON", false};
  return j;
}

/// post_once with exponential backoff on retryable failures.
std::variant<nlohmann::json, RemoteFailure> post_with_retry(HttpPool& pool,
                                                            const RemoteOptions& options,
                                                            const std::string& path,
                                                            const nlohmann::json& body) {
  const std::string payload = body.dump();
  for (int attempt = 0;; ++attempt) {
    auto result = post_once(pool, path, payload);
    const auto* failure = std::get_if<RemoteFailure>(&result);
    if (!failure || !failure->retryable || attempt >= options.max_retries) return result;
    std::this_thread::sleep_for(options.backoff_base * (1 << attempt));
  }
}

bool get_health(HttpPool& pool) {
  auto client = pool.acquire();
  auto res = client->Get("/v1/health");
  if (!res || res->status != 200) return false;
  const auto j = nlohmann::json::parse(res->body, nullptr, false);
  return !j.is_discarded() && j.is_object() && j.value("status", std::string()) == "ok";
}

bool get_reachable(HttpPool& pool) {
  auto client = pool.acquire();
  return static_cast<bool>(client->Get("/v1/health"));
}

}  // namespace

RemoteSegmenter::RemoteSegmenter(RemoteOptions options)
    : options_(std::move(options)),
      pool_(std::make_unique<HttpPool>(options_.url, options_.max_in_flight, options_.timeout)) {}

RemoteSegmenter::~RemoteSegmenter() = default;

nlohmann::json RemoteSegmenter::request_json(const SegmentRequest& request) {
  nlohmann::json j;
  if (!request.image.inline_png.empty()) {
    j["image"] = base64_encode(request.image.inline_png);
  } else {
    j["image_id"] = request.image.image_id;
  }
  if (request.prompt.box) {
    const auto& b = *request.prompt.box;
    j["box"] = {b.x1, b.y1, b.x2, b.y2};
  }
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : request.prompt.points) {
    points.push_back({p.x, p.y, p.positive() ? 1 : 0});
  }
  j["points"] = std::move(points);
  return j;
}

SegmentResult RemoteSegmenter::segment(const SegmentRequest& request) {
  auto result = post_with_retry(*pool_, options_, "/v1/segment", request_json(request));
  if (auto* f = std::get_if<RemoteFailure>(&result)) {
    throw SegmenterError(f->code, f->message, f->retryable);
  }
  const auto& body = std::get<nlohmann::json>(result);
  try {
    BinaryMask mask = decode_rle(rle_from_json(body.at("mask")));
    if (mask.width() != request.image.width || mask.height() != request.image.height) {
      throw SegmenterError("bad_response", "mask dims differ from the image", false);
    }
    return {std::move(mask), body.value("score", 0.0)};
  } catch (const FormatError& e) {
    throw SegmenterError("bad_response", e.what(), false);
  } catch (const nlohmann::json::exception& e) {
    throw SegmenterError("bad_response", e.what(), false);
  }
}

bool RemoteSegmenter::healthy() { return get_health(*pool_); }
bool RemoteSegmenter::reachable() { return get_reachable(*pool_); }

RemoteResponder::RemoteResponder(RemoteOptions options)
    : options_(std::move(options)),
      pool_(std::make_unique<HttpPool>(options_.url, options_.max_in_flight, options_.timeout)) {}

RemoteResponder::~RemoteResponder() = default;

Reply RemoteResponder::respond(const RESample& sample, std::span<const Turn> turns) {
  nlohmann::json body{{"id", sample.id}, {"image_id", sample.image_id}};
  nlohmann::json jturns = nlohmann::json::array();
  for (const auto& t : turns) jturns.push_back({{"role", to_string(t.role)}, {"text", t.text}});
  body["turns"] = std::move(jturns);

  auto result = post_with_retry(*pool_, options_, "/v1/chat", body);
  if (auto* f = std::get_if<RemoteFailure>(&result)) {
    throw ResponderError(f->code, f->message, f->retryable);
  }
  const auto& j = std::get<nlohmann::json>(result);
  try {
    Reply reply{j.at("text").get<std::string>(), {}};
    if (j.contains("token_confidences")) {
      reply.token_confidences = j.at("token_confidences").get<std::vector<double>>();
    }
    return reply;
  } catch (const nlohmann::json::exception& e) {
    throw ResponderError("bad_response", e.what());
  }
}

bool RemoteResponder::reachable() { return get_reachable(*pool_); }

}  // namespace promptseg
