#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "resynth/clients.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <thread>

#include "resynth/parallel.hpp"

namespace resynth {

// ---------------------------------------------------------------------------
// Transport

HttpResponse HttplibTransport::send(const std::string& base_url, const HttpRequest& request,
                                    std::chrono::milliseconds timeout) {
  httplib::Client cli(base_url);
  if (!cli.is_valid()) throw NetworkError("invalid base url '" + base_url + "'");
  const auto secs = timeout.count() / 1000;
  const auto usecs = (timeout.count() % 1000) * 1000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);

  httplib::Headers headers(request.headers.begin(), request.headers.end());
  httplib::Result res = request.method == "GET"
                            ? cli.Get(request.path, headers)
                            : cli.Post(request.path, headers, request.body, request.content_type);
  if (!res) throw NetworkError(base_url + request.path + ": " + httplib::to_string(res.error()));
  return {res->status, res->get_header_value("Content-Type"), res->body};
}

// ---------------------------------------------------------------------------
// Encoding helpers

std::string base64_encode(std::span<const std::byte> data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(data.data()), static_cast<int>(data.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Bytes base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) clean.push_back(c);
  if (clean.size() % 4 != 0) throw FormatError("base64 length is not a multiple of 4", clean.size());
  Bytes out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
  if (n < 0) throw FormatError("invalid base64 data", 0);
  std::size_t size = static_cast<std::size_t>(n);
  if (!clean.empty() && clean.back() == '=') --size;
  if (clean.size() >= 2 && clean[clean.size() - 2] == '=') --size;
  out.resize(size);
  return out;
}

std::string sha256_hex(std::string_view input) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(input.data(), input.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

std::string request_digest(std::string_view endpoint, std::string_view json_body) {
  std::string canonical;
  try {
    canonical = nlohmann::json::parse(json_body).dump();
  } catch (const nlohmann::json::parse_error&) {
    canonical = std::string(json_body);
  }
  std::string input(endpoint);
  input.push_back('\n');
  input += canonical;
  return sha256_hex(input);
}

// ---------------------------------------------------------------------------
// Cassette

CassetteMode parse_cassette_mode(std::string_view text) {
  if (text == "record") return CassetteMode::record;
  if (text == "replay") return CassetteMode::replay;
  if (text == "passthrough") return CassetteMode::passthrough;
  throw ConfigError("unknown cassette mode '" + std::string(text) + "'");
}

std::size_t FixtureCassette::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::optional<CassetteEntry> FixtureCassette::lookup(const std::string& digest) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void FixtureCassette::store(const std::string& digest, CassetteEntry entry) {
  std::lock_guard lock(mutex_);
  entries_.insert_or_assign(digest, std::move(entry));
}

namespace {

template <class UInt>
void put(std::ostream& out, UInt v) {
  char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, sizeof(UInt));
}

template <class UInt>
bool get(std::istream& in, UInt& v, std::uint64_t& offset) {
  unsigned char buf[sizeof(UInt)];
  in.read(reinterpret_cast<char*>(buf), sizeof(UInt));
  const auto got = in.gcount();
  if (got == 0) return false;
  if (got != static_cast<std::streamsize>(sizeof(UInt)))
    throw FormatError("truncated cassette record", offset + static_cast<std::uint64_t>(got));
  offset += sizeof(UInt);
  v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
  return true;
}

std::string get_bytes(std::istream& in, std::uint64_t n, std::uint64_t& offset) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n)
    throw FormatError("truncated cassette record", offset + static_cast<std::uint64_t>(in.gcount()));
  offset += n;
  return s;
}

}  // namespace

void FixtureCassette::save(std::ostream& out) const {
  std::lock_guard lock(mutex_);
  for (const auto& [digest, e] : entries_) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(digest.size()));
    out.write(digest.data(), static_cast<std::streamsize>(digest.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.content_type.size()));
    out.write(e.content_type.data(), static_cast<std::streamsize>(e.content_type.size()));
    put<std::uint64_t>(out, e.body.size());
    out.write(e.body.data(), static_cast<std::streamsize>(e.body.size()));
  }
}

void FixtureCassette::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write cassette '" + path.string() + "'");
  save(out);
}

FixtureCassette FixtureCassette::load(std::istream& in, CassetteMode mode) {
  FixtureCassette c(mode);
  std::uint64_t offset = 0;
  std::uint32_t dlen = 0;
  while (get(in, dlen, offset)) {
    const std::string digest = get_bytes(in, dlen, offset);
    std::uint32_t clen = 0;
    if (!get(in, clen, offset)) throw FormatError("truncated cassette record", offset);
    CassetteEntry e;
    e.content_type = get_bytes(in, clen, offset);
    std::uint64_t blen = 0;
    if (!get(in, blen, offset)) throw FormatError("truncated cassette record", offset);
    e.body = get_bytes(in, blen, offset);
    if (c.entries_.contains(digest)) throw FormatError("duplicate cassette digest " + digest, offset);
    c.entries_.emplace(digest, std::move(e));
  }
  return c;
}

FixtureCassette FixtureCassette::load(const std::filesystem::path& path, CassetteMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open cassette '" + path.string() + "'");
  return load(in, mode);
}

// ---------------------------------------------------------------------------
// Clock and limiter

void SteadyClock::sleep_for(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

Clock& system_clock() {
  static SteadyClock clock;
  return clock;
}

RateLimiter::RateLimiter(double per_minute, Clock& clock)
    : limit_(static_cast<std::size_t>(std::floor(per_minute))), clock_(clock) {
  if (!(per_minute >= 1.0)) throw ConfigError("rate limit must allow at least one request per minute");
}

void RateLimiter::acquire() {
  constexpr auto window = std::chrono::minutes(1);
  for (;;) {
    const auto now = clock_.now();
    while (!recent_.empty() && now - recent_.front() >= window) recent_.pop_front();
    if (recent_.size() < limit_) {
      recent_.push_back(now);
      return;
    }
    const auto wait = std::chrono::ceil<std::chrono::milliseconds>(recent_.front() + window - now);
    clock_.sleep_for(std::max(wait, std::chrono::milliseconds(1)));
  }
}

// ---------------------------------------------------------------------------
// Configuration

const EndpointConfig* ServiceConfig::generator(std::string_view name) const {
  for (const auto& g : generators)
    if (g.name == name) return &g;
  return nullptr;
}

namespace {

EndpointConfig parse_endpoint(const nlohmann::json& j, const std::string& fallback_name) {
  static const std::set<std::string> known = {"name", "base_url", "auth_env", "rate_per_minute",
                                              "timeout_ms", "model", "params"};
  for (const auto& [key, v] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown endpoint key '" + key + "'");
  EndpointConfig e;
  e.name = j.value("name", fallback_name);
  e.base_url = j.at("base_url").get<std::string>();
  e.auth_env = j.value("auth_env", std::string());
  e.rate_per_minute = j.value("rate_per_minute", e.rate_per_minute);
  e.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<std::int64_t>(e.timeout.count())));
  e.model = j.value("model", std::string());
  if (j.contains("params")) e.params = nlohmann::ordered_json(j.at("params"));
  if (e.name.empty()) throw ConfigError("endpoint without a name");
  if (!(e.rate_per_minute >= 1.0)) throw ConfigError("endpoint '" + e.name + "' needs rate_per_minute >= 1");
  if (e.timeout.count() <= 0) throw ConfigError("endpoint '" + e.name + "' needs a positive timeout");
  return e;
}

}  // namespace

ServiceConfig parse_service_config(const nlohmann::json& j) {
  ServiceConfig c;
  try {
    if (!j.is_object()) throw ConfigError("endpoint config must be a JSON object");
    for (const auto& [key, v] : j.items())
      if (key != "caption" && key != "embed" && key != "generators")
        throw ConfigError("unknown endpoint config key '" + key + "'");
    if (j.contains("caption")) c.caption = parse_endpoint(j.at("caption"), "caption");
    if (j.contains("embed")) c.embed = parse_endpoint(j.at("embed"), "embed");
    if (j.contains("generators"))
      for (const auto& g : j.at("generators")) c.generators.push_back(parse_endpoint(g, ""));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad endpoint config: ") + e.what());
  }
  std::sort(c.generators.begin(), c.generators.end(),
            [](const EndpointConfig& a, const EndpointConfig& b) { return a.name < b.name; });
  for (std::size_t i = 1; i < c.generators.size(); ++i)
    if (c.generators[i].name == c.generators[i - 1].name)
      throw ConfigError("two endpoints for source '" + c.generators[i].name + "'");
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open endpoint config '" + path.string() + "'");
  try {
    return parse_service_config(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("endpoint config is not valid JSON: " + std::string(e.what()));
  }
}

// ---------------------------------------------------------------------------
// Client

ServiceClient::ServiceClient(HttpTransport* transport, FixtureCassette* cassette, RetryPolicy retry, Clock* clock)
    : transport_(transport), cassette_(cassette), retry_(retry), clock_(clock ? clock : &system_clock()) {
  if (retry_.retries < 0) throw ConfigError("retry count must be non-negative");
}

ServiceClient::EndpointState& ServiceClient::state(const EndpointConfig& endpoint) {
  std::lock_guard lock(states_mutex_);
  auto& slot = states_[endpoint.name];
  if (!slot) {
    slot = std::make_unique<EndpointState>();
    slot->limiter = std::make_unique<RateLimiter>(endpoint.rate_per_minute, *clock_);
  }
  return *slot;
}

namespace {

std::string error_text(const HttpResponse& r) {
  try {
    const auto j = nlohmann::json::parse(r.body);
    if (j.is_object() && j.contains("error") && j.at("error").is_string()) return j.at("error").get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  return r.body.substr(0, 200);
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

nlohmann::json ServiceClient::call(const EndpointConfig& endpoint, const std::string& path,
                                   const nlohmann::json& body, const std::string& method) {
  const std::string payload = method == "GET" ? std::string() : body.dump();
  const std::string digest = request_digest(endpoint.name + " " + method + " " + path, payload);

  auto parse = [&](const std::string& text) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw NetworkError(endpoint.name + path + ": response is not JSON: " + e.what());
    }
  };

  if (cassette_ && cassette_->mode() == CassetteMode::replay) {
    auto hit = cassette_->lookup(digest);
    if (!hit) throw ReplayMissError("cassette has no response for " + endpoint.name + path + " (" + digest + ")");
    return parse(hit->body);
  }
  if (!transport_) throw ConfigError("no transport configured for " + endpoint.name);

  HttpRequest req;
  req.method = method;
  req.path = path;
  req.body = payload;
  if (!endpoint.auth_env.empty()) {
    const char* token = std::getenv(endpoint.auth_env.c_str());
    if (!token) throw ConfigError("environment variable " + endpoint.auth_env + " is not set");
    req.headers["Authorization"] = std::string("Bearer ") + token;
  }

  EndpointState& st = state(endpoint);
  std::lock_guard serial(st.serial);
  std::string last_error;
  for (int attempt = 0; attempt <= retry_.retries; ++attempt) {
    if (attempt > 0) clock_->sleep_for(retry_.base_delay * (1LL << (attempt - 1)));
    st.limiter->acquire();
    HttpResponse res;
    try {
      res = transport_->send(endpoint.base_url, req, endpoint.timeout);
    } catch (const NetworkError& e) {
      last_error = e.what();
      continue;
    }
    if (res.status == 200) {
      if (cassette_ && cassette_->mode() == CassetteMode::record)
        cassette_->store(digest, {res.content_type, res.body});
      return parse(res.body);
    }
    if (!retryable(res.status))
      throw RefusalError(endpoint.name + path + " returned " + std::to_string(res.status) + ": " + error_text(res),
                         res.status);
    last_error = "status " + std::to_string(res.status) + ": " + error_text(res);
  }
  throw NetworkError(endpoint.name + path + " failed after " + std::to_string(retry_.retries) +
                     " retries: " + last_error);
}

std::string ServiceClient::caption(std::span<const std::byte> image, const EndpointConfig& endpoint,
                                   const CaptionOptions& options) {
  const std::string b64 = base64_encode(image);
  std::string instruction = options.instruction;
  for (int round = 0; round < 2; ++round) {
    nlohmann::json body = {{"image_b64", b64}, {"max_chars", options.max_chars}, {"instruction", instruction}};
    const nlohmann::json res = call(endpoint, "/v1/caption", body);
    if (!res.is_object() || !res.contains("caption") || !res.at("caption").is_string())
      throw NetworkError(endpoint.name + "/v1/caption: response lacks a caption string");
    std::string text = res.at("caption").get<std::string>();
    const std::size_t len = utf8_length(text);
    if (len <= options.max_chars) return text;
    if (round == 1)
      throw OverlengthError("caption is " + std::to_string(len) + " characters after a retry; limit is " +
                            std::to_string(options.max_chars));
    instruction = options.instruction + ". The previous answer had " + std::to_string(len) +
                  " characters; stay within " + std::to_string(options.max_chars) + ".";
  }
  throw OverlengthError("unreachable");
}

Bytes ServiceClient::resynthesize(std::string_view prompt, const EndpointConfig& endpoint) {
  if (prompt.empty()) throw ConfigError("empty prompt");
  nlohmann::json body = {{"prompt", prompt}, {"params", nlohmann::json(endpoint.params)}};
  const nlohmann::json res = call(endpoint, "/v1/generate", body);
  if (!res.is_object() || !res.contains("image_b64") || !res.at("image_b64").is_string())
    throw NetworkError(endpoint.name + "/v1/generate: response lacks image_b64");
  Bytes img = base64_decode(res.at("image_b64").get<std::string>());
  if (img.empty()) throw RefusalError(endpoint.name + " returned an empty image", 200);
  return img;
}

std::vector<float> ServiceClient::embed(std::span<const std::byte> image, const EndpointConfig& endpoint) {
  nlohmann::json body = {{"model", endpoint.model}, {"image_b64", base64_encode(image)}};
  const nlohmann::json res = call(endpoint, "/v1/embed", body);
  try {
    const auto dim = res.at("dim").get<std::size_t>();
    auto vec = res.at("vector").get<std::vector<float>>();
    if (vec.size() != dim)
      throw ConfigError("embedding service sent " + std::to_string(vec.size()) + " values but dim " +
                        std::to_string(dim));
    return vec;
  } catch (const nlohmann::json::exception& e) {
    throw NetworkError(endpoint.name + "/v1/embed: malformed response: " + e.what());
  }
}

nlohmann::json ServiceClient::health(const EndpointConfig& endpoint) {
  return call(endpoint, "/healthz", nlohmann::json(), "GET");
}

// ---------------------------------------------------------------------------

PanelResult build_panel(ServiceClient& client, const ImageRecord& original, std::span<const std::byte> content,
                        std::span<const EndpointConfig> generators, const EndpointConfig& caption_endpoint,
                        const CaptionOptions& options) {
  if (original.kind != ImageKind::original) throw ConfigError("panels are built for originals only");

  PanelResult out;
  out.caption.id = secondary_prompt_id(original.id);
  out.caption.kind = PromptKind::secondary;
  out.caption.character = original.character;
  out.caption.described_image = original.id;
  out.caption.text = client.caption(content, caption_endpoint, options);

  std::vector<const EndpointConfig*> order;
  for (const auto& g : generators) order.push_back(&g);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->name < b->name; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (order[i]->name == order[i - 1]->name) throw ConfigError("two endpoints for source '" + order[i]->name + "'");

  struct Slot {
    std::optional<Bytes> image;
    std::string error;
  };
  std::vector<Slot> slots(order.size());
  parallel_for(order.size(), order.size(), [&](std::size_t i) {
    try {
      slots[i].image = client.resynthesize(out.caption.text, *order[i]);
    } catch (const Error& e) {
      slots[i].error = e.what();
    }
  });

  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::string& source = order[i]->name;
    if (!slots[i].image) {
      out.errors.push_back({source, slots[i].error});
      continue;
    }
    ImageRecord r;
    r.id = resynthesis_id(original.character, original.source, source);
    r.kind = ImageKind::resynthesis;
    r.source = source;
    r.character = original.character;
    r.prompt = out.caption.id;
    r.parent_original = original.id;
    r.content_ref = r.id + ".png";
    out.content.emplace(r.id, std::move(*slots[i].image));
    out.images.push_back(std::move(r));
  }
  return out;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(ServiceClient& client, EndpointConfig endpoint, std::size_t dim)
    : client_(client), endpoint_(std::move(endpoint)), dim_(dim) {
  if (dim_ == 0) throw ConfigError("embedding dim must be positive");
}

FeatureVector HttpEmbeddingBackend::embed(std::span<const std::byte> content) const {
  auto vec = client_.embed(content, endpoint_);
  if (vec.size() != dim_)
    throw ConfigError("embedding service returned dim " + std::to_string(vec.size()) + ", store expects " +
                      std::to_string(dim_));
  return FeatureVector(std::move(vec));
}

void HttpEmbeddingBackend::check_health() const {
  const nlohmann::json h = client_.health(endpoint_);
  if (!h.is_object() || !h.contains("dim")) throw ConfigError("health response lacks dim");
  const auto dim = h.at("dim").get<std::size_t>();
  if (dim != dim_)
    throw ConfigError("embedding service advertises dim " + std::to_string(dim) + ", store expects " +
                      std::to_string(dim_));
}

}  // namespace resynth
