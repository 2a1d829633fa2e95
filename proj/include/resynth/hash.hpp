#pragma once

// Counter-based randomness. Every random quantity in the library is derived
// from a hash of structured keys, so any single draw can be reproduced in
// isolation and no result depends on evaluation order.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <type_traits>

namespace resynth {

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over length-framed fields, finalized with mix64. Framing keeps
// ("ab","c") and ("a","bc") distinct.
class KeyHasher {
 public:
  KeyHasher& add(std::string_view s) noexcept {
    add_u64(s.size());
    for (unsigned char c : s) byte(c);
    return *this;
  }
  KeyHasher& add(std::uint64_t v) noexcept {
    add_u64(8);
    add_u64(v);
    return *this;
  }
  template <class T>
    requires(std::is_integral_v<T> && !std::is_same_v<T, std::uint64_t>)
  KeyHasher& add(T v) noexcept {
    return add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
  }
  KeyHasher& add(const char* s) noexcept { return add(std::string_view(s)); }

  std::uint64_t value() const noexcept { return mix64(state_); }

 private:
  void byte(unsigned char c) noexcept {
    state_ ^= c;
    state_ *= 0x100000001b3ULL;
  }
  void add_u64(std::uint64_t v) noexcept {
    for (int i = 0; i < 8; ++i) byte(static_cast<unsigned char>(v >> (8 * i)));
  }
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

template <class... Parts>
std::uint64_t hash_key(const Parts&... parts) noexcept {
  KeyHasher h;
  (h.add(parts), ...);
  return h.value();
}

// Top 53 bits mapped to [0, 1).
constexpr double unit_interval(std::uint64_t h) noexcept {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// splitmix64 stream seeded from a key.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : state_(key) {}

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() noexcept { return unit_interval(next()); }

  // Uniform integer in [0, n) without modulo bias.
  std::size_t below(std::size_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return static_cast<std::size_t>(r % bound);
  }

  double normal() noexcept;

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Fisher-Yates with CounterRng; identical on every platform, unlike
// std::shuffle.
template <class RandomIt>
void seeded_shuffle(RandomIt first, RandomIt last, CounterRng& rng) {
  const auto n = static_cast<std::size_t>(last - first);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace resynth
