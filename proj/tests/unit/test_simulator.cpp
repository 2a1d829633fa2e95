#include <gtest/gtest.h>

#include <cmath>

#include "resynth/attribution.hpp"
#include "resynth/simulator.hpp"

using namespace resynth;

namespace {

double l2(const FeatureVector& a, const FeatureVector& b) {
  return distance(DistanceKind::euclidean(), a, b);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double plain_accuracy(const SimulatorConfig& cfg) {
  const auto data = generate_synthetic_dataset(cfg);
  return attribute_dataset(data.manifest, data.store, DistanceKind::euclidean()).accuracy();
}

}  // namespace

TEST(Simulator, NoiselessGeometry) {
  SimulatorConfig cfg;
  cfg.noise = 0.0;
  cfg.caption_drift = 0.0;
  cfg.fingerprint_strength = 1.5;
  const Simulator sim(cfg);
  const auto orig = sim.feature(3, "Bing", SynthRole::original());
  const auto same = sim.feature(3, "Bing", SynthRole::resynthesis_of("Bing"));
  const auto other = sim.feature(3, "Freepik", SynthRole::resynthesis_of("Bing"));
  EXPECT_NEAR(l2(orig, same), 0.0, 1e-6);
  // Orthonormal fingerprints: |a f_s - a f_t| = a sqrt(2).
  EXPECT_NEAR(l2(orig, other), 1.5 * std::sqrt(2.0), 1e-5);
}

TEST(Simulator, FingerprintsAreOrthonormal) {
  SimulatorConfig cfg;
  cfg.sources.clear();
  for (const auto& s : all_sources()) cfg.sources.push_back({s, std::nullopt});
  const Simulator sim(cfg);
  ASSERT_EQ(sim.sources().size(), 14u);
  for (std::size_t i = 0; i < 14; ++i)
    for (std::size_t j = 0; j < 14; ++j)
      EXPECT_NEAR(dot(sim.sources()[i].fingerprint, sim.sources()[j].fingerprint), i == j ? 1.0 : 0.0, 1e-12);
}

TEST(Simulator, ZeroStrengthMakesSourcesIndistinguishable) {
  SimulatorConfig cfg;
  cfg.noise = 0.0;
  cfg.caption_drift = 0.0;
  cfg.fingerprint_strength = 0.0;
  const Simulator sim(cfg);
  EXPECT_EQ(sim.feature(1, "Bing", SynthRole::original()), sim.feature(1, "Freepik", SynthRole::original()));
}

TEST(Simulator, PerSourceStrengthOverride) {
  SimulatorConfig cfg;
  cfg.sources = {{{"A", false, false}, 0.0}, {{"B", false, false}, std::nullopt}};
  const Simulator sim(cfg);
  EXPECT_EQ(sim.source("A").strength, 0.0);
  EXPECT_EQ(sim.source("B").strength, 1.0);
  EXPECT_THROW(sim.source("C"), LookupError);
}

TEST(Simulator, DeterministicAndSeedSensitive) {
  SimulatorConfig cfg;
  cfg.characters = 10;
  const auto a = generate_synthetic_dataset(cfg);
  const auto b = generate_synthetic_dataset(cfg, 4);
  EXPECT_EQ(a.store, b.store);
  EXPECT_EQ(a.manifest, b.manifest);
  cfg.seed = 1;
  EXPECT_FALSE(generate_synthetic_dataset(cfg).store == a.store);
}

TEST(Simulator, VectorsRegenerateInIsolation) {
  SimulatorConfig cfg;
  cfg.characters = 10;
  const auto data = generate_synthetic_dataset(cfg);
  const Simulator sim(cfg);
  const std::string id = resynthesis_id(4, "Imagen3", "Bing");
  EXPECT_EQ(data.store.at(id), sim.feature(4, "Bing", SynthRole::resynthesis_of("Imagen3")));
}

TEST(Simulator, CoreCounts) {
  const auto data = generate_synthetic_dataset(SimulatorConfig{});
  EXPECT_EQ(data.manifest.count(ImageKind::original), 1000u);
  EXPECT_EQ(data.manifest.count(ImageKind::resynthesis), 10000u);
  EXPECT_EQ(data.store.size(), 11000u);
  EXPECT_TRUE(validate_manifest(data.manifest).valid());
}

TEST(Simulator, ExtendedSourcesAndTinyLayouts) {
  SimulatorConfig cfg;
  cfg.characters = 10;
  cfg.sources.clear();
  for (const auto& s : all_sources()) cfg.sources.push_back({s, std::nullopt});
  const auto ext = generate_synthetic_dataset(cfg);
  EXPECT_EQ(ext.manifest.count(ImageKind::original), 140u);
  EXPECT_EQ(ext.manifest.count(ImageKind::resynthesis), 1960u);

  SimulatorConfig tiny;
  tiny.characters = 1;
  tiny.sources = {{{"A", false, false}, std::nullopt}, {{"B", false, false}, std::nullopt}};
  const auto t = generate_synthetic_dataset(tiny);
  EXPECT_EQ(t.manifest.count(ImageKind::original), 2u);
  EXPECT_EQ(t.manifest.count(ImageKind::resynthesis), 4u);
}

TEST(Simulator, AccuracyRisesWithStrength) {
  SimulatorConfig cfg;
  cfg.characters = 40;
  double previous = 0.0;
  for (double alpha : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    cfg.fingerprint_strength = alpha;
    const double acc = plain_accuracy(cfg);
    EXPECT_GE(acc, previous - 0.05) << "alpha " << alpha;
    previous = acc;
  }
  EXPECT_GT(previous, 0.95);
}

TEST(Simulator, AccuracyFallsWithDrift) {
  SimulatorConfig cfg;
  cfg.characters = 40;
  double previous = 1.0;
  for (double beta : {0.0, 0.5, 1.0, 3.0}) {
    cfg.caption_drift = beta;
    const double acc = plain_accuracy(cfg);
    EXPECT_LE(acc, previous + 0.05) << "beta " << beta;
    previous = acc;
  }
  EXPECT_LT(previous, 0.5);
}

TEST(Simulator, PerturbedStoreScaleZeroIsExactCopy) {
  SimulatorConfig cfg;
  cfg.characters = 10;
  const Simulator sim(cfg);
  const auto data = generate_synthetic_dataset(cfg);
  const FeatureStore p = perturbed_store(sim, data.manifest, data.store, "jpeg", 0.0);
  EXPECT_EQ(p.size(), 100u);
  for (const auto& [id, v] : p.entries()) EXPECT_EQ(v, data.store.at(id));
  const FeatureStore q = perturbed_store(sim, data.manifest, data.store, "jpeg", 0.5);
  const FeatureStore r = perturbed_store(sim, data.manifest, data.store, "blur", 0.5);
  EXPECT_FALSE(q == p);
  EXPECT_FALSE(q == r);
  EXPECT_EQ(q, perturbed_store(sim, data.manifest, data.store, "jpeg", 0.5));
}

TEST(SimulatorConfig, JsonRoundTripAndValidation) {
  SimulatorConfig cfg;
  cfg.dim = 32;
  cfg.caption_drift = 0.7;
  cfg.operator_noise = {{"jpeg", 0.1}};
  cfg.split = SplitSizes{6, 2, 2};
  cfg.characters = 10;
  const SimulatorConfig back = SimulatorConfig::from_json(nlohmann::json::parse(cfg.to_json().dump()));
  EXPECT_EQ(back.to_json().dump(), cfg.to_json().dump());

  EXPECT_THROW(SimulatorConfig::from_json(nlohmann::json::parse(R"({"dimension": 3})")), ConfigError);
  SimulatorConfig bad;
  bad.dim = 4;  // fewer dims than sources cannot hold orthonormal fingerprints
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = SimulatorConfig{};
  bad.noise = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = SimulatorConfig{};
  bad.characters = 10;
  bad.split = SplitSizes{5, 2, 2};
  EXPECT_THROW(bad.validate(), SplitArityError);
}

TEST(SimulatorConfig, DefaultOperatorNoiseCoversEveryOperator) {
  const auto noise = default_operator_noise();
  EXPECT_EQ(noise.size(), 10u);
  for (const auto& [op, scale] : noise) EXPECT_GT(scale, 0.0) << op;
}
