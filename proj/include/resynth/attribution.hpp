#pragma once

// Resynthesis attribution: an original is attributed to the source whose
// resynthesis lies nearest to it in feature space.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resynth/dataset.hpp"
#include "resynth/features.hpp"
#include "resynth/metrics.hpp"

namespace resynth {

struct PanelEntry {
  std::string_view source;
  std::span<const float> features;
};

struct AttributionResult {
  std::string image;
  std::string predicted;
  std::optional<std::string> truth;
  std::map<std::string, double> distances;  // canonical source order
  std::string distance_kind;
  // Eligible sources left out because their resynthesis features were missing.
  std::vector<std::string> missing_sources;
};

// argmin over the panel; equal distances resolve to the lexicographically
// first source regardless of panel order.
AttributionResult attribute(std::span<const float> original, std::span<const PanelEntry> panel,
                            const DistanceKind& kind);
AttributionResult attribute(const FeatureVector& original,
                            const std::map<std::string, FeatureVector>& panel,
                            const DistanceKind& kind);

struct AttributionError {
  std::string image;
  std::string message;
};

struct DatasetAttribution {
  std::vector<AttributionResult> results;  // ascending (character, source)
  std::vector<AttributionError> errors;
  std::size_t targets = 0;

  double coverage() const noexcept {
    return targets == 0 ? 1.0 : static_cast<double>(results.size()) / static_cast<double>(targets);
  }
  double accuracy() const;
};

struct AttributeOptions {
  std::optional<Split> split;  // nullopt: every original in the manifest
  // Restrict panels (and targets) to these sources; empty means all.
  std::vector<std::string> sources;
  // Features of the originals under analysis, overriding `store` (used for
  // post-processed copies of the test images).
  const FeatureStore* query_store = nullptr;
  std::size_t jobs = 1;
};

DatasetAttribution attribute_dataset(const Manifest& manifest, const FeatureStore& store,
                                     const DistanceKind& kind, const AttributeOptions& options = {});

// Reference pool for Mahalanobis: features of all resyntheses in `split`
// (every resynthesis when nullopt) that are present in the store.
std::vector<FeatureVector> resynthesis_pool(const Manifest& manifest, const FeatureStore& store,
                                            std::optional<Split> split);

// One JSON object per line: {image, predicted, truth, distances, distance_kind}.
void write_results(std::span<const AttributionResult> results, std::ostream& out);

}  // namespace resynth
