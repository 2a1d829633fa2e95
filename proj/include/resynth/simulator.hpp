#pragma once

// Feature-level stand-in for real generators and a real encoder. Every
// vector is a sum of a per-character semantic base, a per-source unit
// fingerprint, a caption drift tied to the described original, and
// isotropic noise, all drawn from hashed counters so any single vector can
// be regenerated in isolation.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "resynth/dataset.hpp"
#include "resynth/features.hpp"

namespace resynth {

struct SyntheticSourceSpec {
  SourceId source;
  std::optional<double> strength;  // overrides SimulatorConfig::fingerprint_strength
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct SimulatorConfig {
  std::size_t dim = 64;
  std::size_t characters = 100;
  double semantic_spread = 0.5;
  double caption_drift = 0.3;  // beta
  double noise = 0.2;          // sigma
  double fingerprint_strength = 1.0;  // alpha
  bool orthogonalize = true;
  std::uint64_t seed = 0;
  std::vector<SyntheticSourceSpec> sources;  // empty: the ten core sources
  std::optional<SplitSizes> split;           // nullopt: 80/10/10 by character count
  std::uint64_t split_seed = 0;
  // Post-processing modeled as extra isotropic noise on the query features,
  // keyed by operator name.
  std::map<std::string, double> operator_noise;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static SimulatorConfig from_json(const nlohmann::json& j);
};

SimulatorConfig load_simulator_config(const std::filesystem::path& path);

// Default per-operator noise scales used when a config lists none.
std::map<std::string, double> default_operator_noise();

// Role of a synthesized vector: an original, or a resynthesis of the
// original that `described_source` made for the same character.
struct SynthRole {
  ImageKind kind = ImageKind::original;
  std::string described_source;

  static SynthRole original() { return {}; }
  static SynthRole resynthesis_of(std::string source) { return {ImageKind::resynthesis, std::move(source)}; }
};

struct SyntheticSource {
  SourceId source;
  std::vector<double> fingerprint;  // unit norm
  double strength = 1.0;
};

class Simulator {
 public:
  explicit Simulator(SimulatorConfig config);

  const SimulatorConfig& config() const noexcept { return config_; }
  const std::vector<SyntheticSource>& sources() const noexcept { return sources_; }
  const SyntheticSource& source(std::string_view name) const;

  std::vector<double> base(CharacterId character) const;
  std::vector<double> drift(CharacterId character, std::string_view described_source) const;

  FeatureVector feature(CharacterId character, std::string_view source, const SynthRole& role) const;

 private:
  SimulatorConfig config_;
  std::vector<SyntheticSource> sources_;  // canonical order
};

struct SyntheticDataset {
  Manifest manifest;
  FeatureStore store;
};

SyntheticDataset generate_synthetic_dataset(const SimulatorConfig& config, std::size_t jobs = 1);

// Copy of the originals' features with N(0, scale^2) noise added per
// coordinate, keyed by (seed, operator, image id). Scale 0 reproduces the
// clean vectors exactly.
FeatureStore perturbed_store(const Simulator& sim, const Manifest& manifest, const FeatureStore& clean,
                             std::string_view op, double scale);

}  // namespace resynth
