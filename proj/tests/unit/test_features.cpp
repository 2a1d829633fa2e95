#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include "resynth/features.hpp"

using namespace resynth;

namespace {

FeatureStore random_store(std::mt19937_64& rng, std::size_t dim, std::size_t count) {
  FeatureStore s(dim);
  std::uniform_int_distribution<int> len(1, 24);
  std::uniform_int_distribution<int> ch('a', 'z');
  // Arbitrary finite bit patterns, including subnormals and signed zeros.
  std::uniform_int_distribution<std::uint32_t> bits;
  while (s.size() < count) {
    std::string id(static_cast<std::size_t>(len(rng)), 'x');
    for (auto& c : id) c = static_cast<char>(ch(rng));
    std::vector<float> v(dim);
    for (auto& x : v) {
      do {
        x = std::bit_cast<float>(bits(rng));
      } while (!std::isfinite(x));
    }
    if (!s.contains(id)) s.insert(id, FeatureVector(std::move(v)));
  }
  return s;
}

std::string serialize(const FeatureStore& s) {
  std::ostringstream out;
  save_store(s, out);
  return out.str();
}

}  // namespace

TEST(FeatureVector, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(FeatureVector(std::vector<float>{}), DimensionError);
  EXPECT_THROW(FeatureVector({1.0f, std::numeric_limits<float>::quiet_NaN()}), NonFiniteError);
  EXPECT_THROW(FeatureVector({std::numeric_limits<float>::infinity()}), NonFiniteError);
}

TEST(FeatureStore, RejectsMismatchedDim) {
  FeatureStore s(3);
  s.insert("a", FeatureVector({1, 2, 3}));
  EXPECT_THROW(s.insert("b", FeatureVector({1, 2})), DimensionError);
  EXPECT_EQ(s.size(), 1u);
}

TEST(FeatureStore, DuplicateIdMustCarryIdenticalVector) {
  FeatureStore s(2);
  s.insert("a", FeatureVector({1, 2}));
  s.insert("a", FeatureVector({1, 2}));
  EXPECT_EQ(s.size(), 1u);
  EXPECT_THROW(s.insert("a", FeatureVector({1, 3})), Error);
  EXPECT_THROW(s.at("missing"), LookupError);
}

TEST(StoreFormat, FileSizeFollowsLayout) {
  FeatureStore s(768);
  for (int i = 0; i < 10; ++i) s.insert("img-" + std::to_string(i), FeatureVector(std::vector<float>(768, 0.5f)));
  // header (4 magic + 2 version + 4 dim + 8 count) + per entry (2 + id + 768 * 4)
  const std::size_t expected = 18 + 10 * (2 + 5 + 768 * 4);
  EXPECT_EQ(serialize(s).size(), expected);
  EXPECT_EQ(kStoreHeaderBytes, 18u);
}

TEST(StoreFormat, HeaderBytes) {
  FeatureStore s(3);
  s.insert("a", FeatureVector({1.0f, -2.0f, 0.25f}));
  const std::string b = serialize(s);
  ASSERT_GE(b.size(), 18u);
  EXPECT_EQ(b.substr(0, 4), "RFSA");
  EXPECT_EQ(static_cast<unsigned char>(b[4]), 1);
  EXPECT_EQ(static_cast<unsigned char>(b[5]), 0);
  EXPECT_EQ(static_cast<unsigned char>(b[6]), 3);
  EXPECT_EQ(static_cast<unsigned char>(b[10]), 1);
  // 1.0f little-endian after the u16 id length and the id byte
  const unsigned char one[4] = {0x00, 0x00, 0x80, 0x3f};
  EXPECT_EQ(std::memcmp(b.data() + 18 + 2 + 1, one, 4), 0);
}

TEST(StoreFormat, RoundTripIsBitExact) {
  std::mt19937_64 rng(42);
  for (std::size_t dim : {1u, 3u, 768u}) {
    for (int i = 0; i < 20; ++i) {
      const FeatureStore s = random_store(rng, dim, 1 + static_cast<std::size_t>(i % 7));
      const std::string bytes = serialize(s);
      std::istringstream in(bytes);
      const FeatureStore back = load_store(in);
      EXPECT_EQ(back, s);
      EXPECT_EQ(serialize(back), bytes);
    }
  }
}

TEST(StoreFormat, RoundTripThroughFile) {
  std::mt19937_64 rng(7);
  const FeatureStore s = random_store(rng, 16, 5);
  const auto path = std::filesystem::temp_directory_path() / "resynth_store_roundtrip.rfs";
  save_store(s, path);
  EXPECT_EQ(load_store(path), s);
  std::filesystem::remove(path);
}

TEST(StoreFormat, TruncationReportsOffset) {
  FeatureStore s(4);
  s.insert("ab", FeatureVector({1, 2, 3, 4}));
  s.insert("cd", FeatureVector({5, 6, 7, 8}));
  const std::string bytes = serialize(s);
  // Cut inside the second entry's vector: header 18, first entry 2+2+16,
  // second entry id block 4, then 6 of its 16 vector bytes.
  const std::size_t cut = 18 + 20 + 4 + 6;
  std::istringstream in(bytes.substr(0, cut));
  try {
    load_store(in);
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), cut);
  }
}

TEST(StoreFormat, RejectsBadMagicVersionAndTrailingBytes) {
  FeatureStore s(2);
  s.insert("a", FeatureVector({1, 2}));
  std::string bytes = serialize(s);

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream a(bad);
  EXPECT_THROW(load_store(a), FormatError);

  bad = bytes;
  bad[4] = 2;
  std::istringstream b(bad);
  EXPECT_THROW(load_store(b), FormatError);

  std::istringstream c(bytes + "z");
  EXPECT_THROW(load_store(c), FormatError);

  std::istringstream d(bytes.substr(0, 10));
  EXPECT_THROW(load_store(d), FormatError);
}

TEST(StoreFormat, RejectsNonFiniteOnDisk) {
  FeatureStore s(1);
  s.insert("a", FeatureVector({1.0f}));
  std::string bytes = serialize(s);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + bytes.size() - 4, &nan, 4);
  std::istringstream in(bytes);
  EXPECT_THROW(load_store(in), FormatError);
}

namespace {

class CountingBackend final : public EmbeddingBackend {
 public:
  explicit CountingBackend(std::size_t reported_dim, std::size_t actual_dim)
      : reported_(reported_dim), actual_(actual_dim) {}
  std::size_t dim() const override { return reported_; }
  std::string model() const override { return "counting"; }
  FeatureVector embed(std::span<const std::byte> content) const override {
    std::vector<float> v(actual_, static_cast<float>(content.size()));
    return FeatureVector(std::move(v));
  }

 private:
  std::size_t reported_, actual_;
};

Bytes bytes_of(std::string_view s) {
  Bytes b(s.size());
  std::memcpy(b.data(), s.data(), s.size());
  return b;
}

}  // namespace

TEST(EmbedBatch, ThreeImagesGiveThreeVectors) {
  HashEmbeddingBackend backend(32, 1);
  auto resolve = fixture_resolver({{"a.png", bytes_of("aaa")}, {"b.png", bytes_of("bb")}, {"c.png", bytes_of("c")}});
  std::vector<EmbedRequest> req{{"a", "a.png"}, {"b", "b.png"}, {"c", "c.png"}};
  const auto res = embed_batch(backend, req, resolve);
  EXPECT_EQ(res.store.size(), 3u);
  EXPECT_EQ(res.store.dim(), 32u);
  EXPECT_TRUE(res.errors.empty());
}

TEST(EmbedBatch, DuplicateIdCollapses) {
  HashEmbeddingBackend backend(8);
  auto resolve = fixture_resolver({{"a.png", bytes_of("same")}});
  std::vector<EmbedRequest> req{{"a", "a.png"}, {"a", "a.png"}};
  const auto res = embed_batch(backend, req, resolve);
  EXPECT_EQ(res.store.size(), 1u);
  EXPECT_EQ(res.store.at("a"), backend.embed(bytes_of("same")));
}

TEST(EmbedBatch, SameBytesSameVector) {
  HashEmbeddingBackend backend(16, 3);
  EXPECT_EQ(backend.embed(bytes_of("xyz")), backend.embed(bytes_of("xyz")));
  EXPECT_FALSE(backend.embed(bytes_of("xyz")) == backend.embed(bytes_of("xy")));
}

TEST(EmbedBatch, UnresolvableContentIsPerItemError) {
  HashEmbeddingBackend backend(8);
  auto resolve = fixture_resolver({{"a.png", bytes_of("a")}});
  std::vector<EmbedRequest> req{{"z", "missing.png"}, {"a", "a.png"}, {"m", "gone.png"}};
  const auto res = embed_batch(backend, req, resolve, 2);
  EXPECT_EQ(res.store.size(), 1u);
  ASSERT_EQ(res.errors.size(), 2u);
  EXPECT_EQ(res.errors[0].id, "m");
  EXPECT_EQ(res.errors[1].id, "z");
}

TEST(EmbedBatch, BackendDimMismatchIsFatal) {
  CountingBackend backend(8, 4);
  auto resolve = fixture_resolver({{"a.png", bytes_of("a")}});
  std::vector<EmbedRequest> req{{"a", "a.png"}};
  EXPECT_THROW(embed_batch(backend, req, resolve), ConfigError);
}

TEST(EmbedBatch, OrderInsensitive) {
  HashEmbeddingBackend backend(24, 9);
  std::map<std::string, Bytes, std::less<>> fixtures;
  std::vector<EmbedRequest> req;
  for (int i = 0; i < 40; ++i) {
    const std::string id = "img" + std::to_string(i);
    fixtures.emplace(id + ".png", bytes_of("content-" + std::to_string(i * 7)));
    req.push_back({id, id + ".png"});
  }
  auto resolve = fixture_resolver(fixtures);
  const auto forward = embed_batch(backend, req, resolve, 1);
  std::mt19937 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(req.begin(), req.end(), rng);
    EXPECT_EQ(embed_batch(backend, req, resolve, 4).store, forward.store);
  }
}

TEST(EmbedBatch, TestSplitScaleCount) {
  // 100 originals and their 1,000 resyntheses.
  HashEmbeddingBackend backend(16);
  std::map<std::string, Bytes, std::less<>> fixtures;
  std::vector<EmbedRequest> req;
  for (int i = 0; i < 1100; ++i) {
    const std::string id = "img" + std::to_string(i);
    fixtures.emplace(id, bytes_of(id));
    req.push_back({id, id});
  }
  EXPECT_EQ(embed_batch(backend, req, fixture_resolver(fixtures), 2).store.size(), 1100u);
}
