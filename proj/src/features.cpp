#include "resynth/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <mutex>
#include <ostream>

#include "resynth/hash.hpp"
#include "resynth/parallel.hpp"

namespace resynth {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

FeatureVector::FeatureVector(std::vector<float> values) : values_(std::move(values)) {
  if (values_.empty()) throw DimensionError("feature vector must have positive dim");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i]))
      throw NonFiniteError("feature value " + std::to_string(i) + " is not finite");
  }
}

bool operator==(const FeatureVector& a, const FeatureVector& b) noexcept {
  return a.values_.size() == b.values_.size() &&
         std::memcmp(a.values_.data(), b.values_.data(), a.values_.size() * sizeof(float)) == 0;
}

FeatureStore::FeatureStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DimensionError("feature store dim must be positive");
}

void FeatureStore::insert(std::string id, FeatureVector vector) {
  if (vector.dim() != dim_)
    throw DimensionError("vector for '" + id + "' has dim " + std::to_string(vector.dim()) +
                         ", store dim is " + std::to_string(dim_));
  auto it = entries_.find(id);
  if (it != entries_.end()) {
    if (!(it->second == vector))
      throw Error("conflicting vectors for id '" + id + "'");
    return;
  }
  entries_.emplace(std::move(id), std::move(vector));
}

bool FeatureStore::contains(std::string_view id) const { return entries_.find(id) != entries_.end(); }

const FeatureVector* FeatureStore::find(std::string_view id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

const FeatureVector& FeatureStore::at(std::string_view id) const {
  const FeatureVector* v = find(id);
  if (!v) throw LookupError("no features for '" + std::string(id) + "'");
  return *v;
}

bool operator==(const FeatureStore& a, const FeatureStore& b) noexcept {
  return a.dim_ == b.dim_ && a.entries_ == b.entries_;
}

// ---------------------------------------------------------------------------
// Binary format

namespace {

constexpr char kMagic[4] = {'R', 'F', 'S', 'A'};

template <class UInt>
void put_le(std::ostream& out, UInt v) {
  char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, sizeof(UInt));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void read(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) {
      throw FormatError(std::string("truncated store: expected ") + what, offset_ + got);
    }
    offset_ += n;
  }

  template <class UInt>
  UInt le(const char* what) {
    unsigned char buf[sizeof(UInt)];
    read(buf, sizeof(UInt), what);
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
    return v;
  }

  std::uint64_t offset() const noexcept { return offset_; }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace

void save_store(const FeatureStore& store, std::ostream& out) {
  out.write(kMagic, 4);
  put_le<std::uint16_t>(out, kStoreFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  put_le<std::uint64_t>(out, store.size());
  for (const auto& [id, vec] : store.entries()) {
    if (id.size() > 0xFFFF) throw Error("image id too long for store format: '" + id + "'");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    for (float f : vec.values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
}

void save_store(const FeatureStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  save_store(store, out);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

FeatureStore load_store(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic", 0);
  const auto version = r.le<std::uint16_t>("version");
  if (version != kStoreFormatVersion)
    throw FormatError("unsupported store version " + std::to_string(version), 4);
  const auto dim = r.le<std::uint32_t>("dim");
  if (dim == 0) throw FormatError("dim must be positive", 6);
  const auto count = r.le<std::uint64_t>("count");

  FeatureStore store(dim);
  std::vector<unsigned char> raw(static_cast<std::size_t>(dim) * 4);
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::uint64_t entry_offset = r.offset();
    const auto len = r.le<std::uint16_t>("id length");
    std::string id(len, '\0');
    r.read(id.data(), len, "id bytes");
    r.read(raw.data(), raw.size(), "vector values");
    std::vector<float> values(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const std::uint32_t bits = static_cast<std::uint32_t>(raw[4 * i]) |
                                 static_cast<std::uint32_t>(raw[4 * i + 1]) << 8 |
                                 static_cast<std::uint32_t>(raw[4 * i + 2]) << 16 |
                                 static_cast<std::uint32_t>(raw[4 * i + 3]) << 24;
      values[i] = std::bit_cast<float>(bits);
    }
    if (store.contains(id)) throw FormatError("duplicate id '" + id + "'", entry_offset);
    try {
      store.insert(std::move(id), FeatureVector(std::move(values)));
    } catch (const NonFiniteError& err) {
      throw FormatError(err.what(), entry_offset);
    }
  }
  if (!r.at_end()) throw FormatError("trailing bytes after last entry", r.offset());
  return store;
}

FeatureStore load_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature store '" + path.string() + "'");
  return load_store(in);
}

// ---------------------------------------------------------------------------
// Embedding

HashEmbeddingBackend::HashEmbeddingBackend(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim == 0) throw ConfigError("backend dim must be positive");
}

std::string HashEmbeddingBackend::model() const {
  return "hash-fixture/" + std::to_string(dim_) + "/" + std::to_string(seed_);
}

FeatureVector HashEmbeddingBackend::embed(std::span<const std::byte> content) const {
  KeyHasher h;
  h.add(seed_);
  h.add(std::string_view(reinterpret_cast<const char*>(content.data()), content.size()));
  CounterRng rng(h.value());
  std::vector<float> v(dim_);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return FeatureVector(std::move(v));
}

std::optional<Bytes> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::vector<char> chars((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Bytes out(chars.size());
  std::memcpy(out.data(), chars.data(), chars.size());
  return out;
}

ContentResolver directory_resolver(std::filesystem::path root) {
  return [root = std::move(root)](std::string_view ref) -> std::optional<Bytes> {
    return read_file_bytes(root / std::filesystem::path(std::string(ref)));
  };
}

ContentResolver fixture_resolver(std::map<std::string, Bytes, std::less<>> fixtures) {
  return [fixtures = std::move(fixtures)](std::string_view ref) -> std::optional<Bytes> {
    auto it = fixtures.find(ref);
    if (it == fixtures.end()) return std::nullopt;
    return it->second;
  };
}

EmbedBatchResult embed_batch(const EmbeddingBackend& backend, std::span<const EmbedRequest> images,
                             const ContentResolver& resolve, std::size_t jobs) {
  const std::size_t dim = backend.dim();

  // Deduplicate by id; the same id with two different refs is an item error.
  std::map<std::string, std::string, std::less<>> unique;
  std::vector<EmbedItemError> errors;
  for (const auto& req : images) {
    auto [it, inserted] = unique.emplace(req.id, req.content_ref);
    if (!inserted && it->second != req.content_ref)
      errors.push_back({req.id, "id submitted with two different content refs"});
  }

  std::vector<std::pair<std::string, std::string>> work(unique.begin(), unique.end());
  std::vector<std::optional<FeatureVector>> vectors(work.size());
  std::vector<std::string> failures(work.size());

  parallel_for(work.size(), jobs, [&](std::size_t i) {
    const auto bytes = resolve(work[i].second);
    if (!bytes) {
      failures[i] = "cannot resolve content_ref '" + work[i].second + "'";
      return;
    }
    FeatureVector v = backend.embed(*bytes);
    if (v.dim() != dim)
      throw ConfigError("backend '" + backend.model() + "' returned dim " +
                        std::to_string(v.dim()) + ", expected " + std::to_string(dim));
    vectors[i] = std::move(v);
  });

  EmbedBatchResult result{FeatureStore(dim), {}};
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (vectors[i]) {
      result.store.insert(work[i].first, std::move(*vectors[i]));
    } else {
      errors.push_back({work[i].first, failures[i]});
    }
  }
  std::sort(errors.begin(), errors.end(),
            [](const EmbedItemError& a, const EmbedItemError& b) { return a.id < b.id; });
  result.errors = std::move(errors);
  return result;
}

}  // namespace resynth
