#pragma once

// Clients for the captioning and generation services, with a cassette that
// records responses keyed by request digest and replays them offline.

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "resynth/dataset.hpp"
#include "resynth/error.hpp"
#include "resynth/features.hpp"

namespace resynth {

class NetworkError : public Error {
 public:
  using Error::Error;
};

// Non-retryable rejection by a service (moderation block, bad request).
class RefusalError : public Error {
 public:
  RefusalError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class OverlengthError : public Error {
 public:
  using Error::Error;
};

class ReplayMissError : public Error {
 public:
  using Error::Error;
};

struct HttpRequest {
  std::string method = "POST";
  std::string path;
  std::string body;
  std::string content_type = "application/json";
  std::map<std::string, std::string> headers;
};

struct HttpResponse {
  int status = 0;
  std::string content_type;
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Throws NetworkError when no response arrives.
  virtual HttpResponse send(const std::string& base_url, const HttpRequest& request,
                            std::chrono::milliseconds timeout) = 0;
};

// cpp-httplib backed transport (http and https).
class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse send(const std::string& base_url, const HttpRequest& request,
                    std::chrono::milliseconds timeout) override;
};

// ---------------------------------------------------------------------------
// Cassette

enum class CassetteMode { record, replay, passthrough };

CassetteMode parse_cassette_mode(std::string_view text);

struct CassetteEntry {
  std::string content_type;
  std::string body;
  friend bool operator==(const CassetteEntry&, const CassetteEntry&) = default;
};

std::string sha256_hex(std::string_view data);

// Hex SHA-256 of the endpoint name and the request body re-serialized with
// sorted keys and no whitespace.
std::string request_digest(std::string_view endpoint, std::string_view json_body);

class FixtureCassette {
 public:
  explicit FixtureCassette(CassetteMode mode) : mode_(mode) {}
  FixtureCassette(FixtureCassette&& other) noexcept : mode_(other.mode_), entries_(std::move(other.entries_)) {}

  CassetteMode mode() const noexcept { return mode_; }
  std::size_t size() const;
  std::optional<CassetteEntry> lookup(const std::string& digest) const;
  void store(const std::string& digest, CassetteEntry entry);
  const std::map<std::string, CassetteEntry>& entries() const noexcept { return entries_; }

  // Records in digest order: u32 digest length, digest, u32 content-type
  // length, content type, u64 body length, body. Little-endian, no header.
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static FixtureCassette load(std::istream& in, CassetteMode mode);
  static FixtureCassette load(const std::filesystem::path& path, CassetteMode mode);

 private:
  CassetteMode mode_;
  mutable std::mutex mutex_;
  std::map<std::string, CassetteEntry> entries_;
};

// ---------------------------------------------------------------------------
// Time and rate limiting

class Clock {
 public:
  using time_point = std::chrono::steady_clock::time_point;
  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_for(std::chrono::milliseconds d) = 0;
};

class SteadyClock final : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_for(std::chrono::milliseconds d) override;
};

Clock& system_clock();

// Sliding one-minute window: acquire() blocks until fewer than `per_minute`
// calls happened in the last 60 s.
class RateLimiter {
 public:
  RateLimiter(double per_minute, Clock& clock);
  void acquire();

 private:
  std::size_t limit_;
  Clock& clock_;
  std::deque<Clock::time_point> recent_;
};

// ---------------------------------------------------------------------------
// Endpoints

struct EndpointConfig {
  std::string name;      // source name for generators
  std::string base_url;
  std::string auth_env;  // environment variable holding a bearer token; empty for none
  double rate_per_minute = 60.0;
  std::chrono::milliseconds timeout{60'000};
  std::string model;                                             // recorded in metadata
  nlohmann::ordered_json params = nlohmann::ordered_json::object();  // freeform generation parameters
};

struct ServiceConfig {
  std::optional<EndpointConfig> caption;
  std::optional<EndpointConfig> embed;
  std::vector<EndpointConfig> generators;  // sorted by name

  const EndpointConfig* generator(std::string_view name) const;
};

ServiceConfig parse_service_config(const nlohmann::json& j);
ServiceConfig load_service_config(const std::filesystem::path& path);

struct RetryPolicy {
  int retries = 3;
  std::chrono::milliseconds base_delay{500};
};

inline constexpr std::string_view kDefaultCaptionInstruction =
    "Provide a detailed description of the character represented in this image in less than 200 characters";

struct CaptionOptions {
  std::size_t max_chars = kMaxPromptChars;
  std::string instruction{kDefaultCaptionInstruction};
};

std::string base64_encode(std::span<const std::byte> data);
Bytes base64_decode(std::string_view text);

class ServiceClient {
 public:
  // `transport` may be null when the cassette replays; `clock` defaults to
  // the steady clock.
  ServiceClient(HttpTransport* transport, FixtureCassette* cassette, RetryPolicy retry = {},
                Clock* clock = nullptr);

  // POST /v1/caption {image_b64, max_chars, instruction} -> {caption}.
  std::string caption(std::span<const std::byte> image, const EndpointConfig& endpoint,
                      const CaptionOptions& options = {});

  // POST /v1/generate {prompt, params} -> {image_b64}.
  Bytes resynthesize(std::string_view prompt, const EndpointConfig& endpoint);

  // POST /v1/embed {model, image_b64} -> {dim, vector}.
  std::vector<float> embed(std::span<const std::byte> image, const EndpointConfig& endpoint);

  // GET /healthz -> {model, dim}.
  nlohmann::json health(const EndpointConfig& endpoint);

  // Issues one JSON call with rate limiting, retries and the cassette.
  nlohmann::json call(const EndpointConfig& endpoint, const std::string& path, const nlohmann::json& body,
                      const std::string& method = "POST");

 private:
  struct EndpointState {
    std::mutex serial;
    std::unique_ptr<RateLimiter> limiter;
  };
  EndpointState& state(const EndpointConfig& endpoint);

  HttpTransport* transport_;
  FixtureCassette* cassette_;
  RetryPolicy retry_;
  Clock* clock_;
  std::mutex states_mutex_;
  std::map<std::string, std::unique_ptr<EndpointState>> states_;
};

// ---------------------------------------------------------------------------
// Panels

struct PanelItemError {
  std::string source;
  std::string message;
};

struct PanelResult {
  PromptRecord caption;
  std::vector<ImageRecord> images;      // sorted by source
  std::map<std::string, Bytes> content; // image id -> bytes
  std::vector<PanelItemError> errors;   // sorted by source

  bool complete() const noexcept { return errors.empty(); }
};

// Captions the original once, then asks every generator for a resynthesis
// concurrently (one request in flight per endpoint). A caption failure
// propagates before any generation call is made.
PanelResult build_panel(ServiceClient& client, const ImageRecord& original, std::span<const std::byte> content,
                        std::span<const EndpointConfig> generators, const EndpointConfig& caption_endpoint,
                        const CaptionOptions& options = {});

// Embedding backend served over HTTP.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(ServiceClient& client, EndpointConfig endpoint, std::size_t dim);
  std::size_t dim() const override { return dim_; }
  std::string model() const override { return endpoint_.model; }
  FeatureVector embed(std::span<const std::byte> content) const override;
  // Throws ConfigError when the service advertises a different dim.
  void check_health() const;

 private:
  ServiceClient& client_;
  EndpointConfig endpoint_;
  std::size_t dim_;
};

}  // namespace resynth
