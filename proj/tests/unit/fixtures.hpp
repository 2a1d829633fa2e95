#pragma once

#include <numeric>
#include <vector>

#include "resynth/dataset.hpp"

namespace resynth::testing {

inline std::vector<CharacterId> character_range(int n) {
  std::vector<CharacterId> c(static_cast<std::size_t>(n));
  std::iota(c.begin(), c.end(), 0);
  return c;
}

inline Manifest core_manifest(int characters = 100, std::uint64_t seed = 0) {
  const auto chars = character_range(characters);
  Manifest m = build_layout(core_sources(), chars);
  const std::size_t tenth = static_cast<std::size_t>(characters) / 10;
  return build_split(m, static_cast<std::size_t>(characters) - 2 * tenth, tenth, tenth, seed);
}

inline Manifest extended_test_manifest() {
  const Manifest test = restrict_to_split(core_manifest(), Split::test);
  const auto ext = extension_sources();
  ExtensionParts parts = build_extension_layout(test, ext);
  return merge_extension(test, parts.images, ext, parts.prompts);
}

}  // namespace resynth::testing
