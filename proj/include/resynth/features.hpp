#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resynth/error.hpp"

namespace resynth {

inline constexpr std::size_t kDefaultFeatureDim = 768;

// Fixed-dimension embedding of one image. Values are finite 32-bit floats.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::vector<float> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const float> values() const noexcept { return values_; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  // Bitwise equality (distinguishes -0.0f from 0.0f).
  friend bool operator==(const FeatureVector& a, const FeatureVector& b) noexcept;

 private:
  std::vector<float> values_;
};

// Map from image id to feature vector, all of one dimension.
class FeatureStore {
 public:
  explicit FeatureStore(std::size_t dim = kDefaultFeatureDim);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  // Rejects a dim mismatch; re-inserting an id is accepted only with a
  // bit-identical vector.
  void insert(std::string id, FeatureVector vector);

  bool contains(std::string_view id) const;
  const FeatureVector* find(std::string_view id) const;
  const FeatureVector& at(std::string_view id) const;

  const std::map<std::string, FeatureVector, std::less<>>& entries() const noexcept {
    return entries_;
  }

  friend bool operator==(const FeatureStore& a, const FeatureStore& b) noexcept;

 private:
  std::size_t dim_;
  std::map<std::string, FeatureVector, std::less<>> entries_;
};

// Binary layout: "RFSA", u16 version, u32 dim, u64 count, then per entry
// u16 id length, id bytes, dim little-endian float32. No padding.
inline constexpr std::uint16_t kStoreFormatVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 4 + 2 + 4 + 8;

void save_store(const FeatureStore& store, std::ostream& out);
void save_store(const FeatureStore& store, const std::filesystem::path& path);
FeatureStore load_store(std::istream& in);
FeatureStore load_store(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Embedding

using Bytes = std::vector<std::byte>;

// Image content -> feature vector of a fixed dim. Identical bytes must give
// an identical vector.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::size_t dim() const = 0;
  virtual std::string model() const = 0;
  virtual FeatureVector embed(std::span<const std::byte> content) const = 0;
};

// Deterministic pseudo-embedding from a hash of the content bytes. Used for
// fixtures and offline pipeline tests.
class HashEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HashEmbeddingBackend(std::size_t dim = kDefaultFeatureDim, std::uint64_t seed = 0);
  std::size_t dim() const override { return dim_; }
  std::string model() const override;
  FeatureVector embed(std::span<const std::byte> content) const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// content_ref -> bytes, or nullopt when it cannot be resolved.
using ContentResolver = std::function<std::optional<Bytes>(std::string_view content_ref)>;

ContentResolver directory_resolver(std::filesystem::path root);
ContentResolver fixture_resolver(std::map<std::string, Bytes, std::less<>> fixtures);

struct EmbedRequest {
  std::string id;
  std::string content_ref;
};

struct EmbedItemError {
  std::string id;
  std::string message;
};

struct EmbedBatchResult {
  FeatureStore store;
  std::vector<EmbedItemError> errors;  // sorted by id
};

// Embeds every request; unresolvable content becomes a per-item error. A
// backend returning the wrong dim is a configuration fault and throws.
EmbedBatchResult embed_batch(const EmbeddingBackend& backend, std::span<const EmbedRequest> images,
                             const ContentResolver& resolve, std::size_t jobs = 1);

std::optional<Bytes> read_file_bytes(const std::filesystem::path& path);

}  // namespace resynth
