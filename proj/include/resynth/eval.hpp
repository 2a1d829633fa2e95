#pragma once

// The three evaluation tasks (few-shot, plain, robust), the episodic
// sampling protocol, and accuracy reports with per-repetition values.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "resynth/baselines.hpp"
#include "resynth/dataset.hpp"
#include "resynth/features.hpp"
#include "resynth/metrics.hpp"

namespace resynth {

// Fraction of (predicted, truth) pairs that agree.
double accuracy(std::span<const std::pair<std::string, std::string>> predictions);

// ---------------------------------------------------------------------------
// Few-shot episodes

struct EpisodeOptions {
  // Characters set aside from the test pool; defaults to k. Reserving the
  // largest shot count of a grid keeps the test set fixed across shots.
  std::optional<std::size_t> reserve;
  // Explicit class list; empty selects with default_classes().
  std::vector<std::string> classes;
};

struct LabeledItem {
  std::string image;
  std::string source;
  friend bool operator==(const LabeledItem&, const LabeledItem&) = default;
};

struct FewShotEpisode {
  std::size_t shots = 0;
  std::size_t n_classes = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> classes;               // canonical order
  std::vector<CharacterId> train_characters;      // sorted
  std::vector<CharacterId> test_characters;       // sorted
  std::vector<LabeledItem> train_items;           // resyntheses, k per class
  std::vector<LabeledItem> test_items;            // originals of the test characters
};

// First n core sources in canonical order; beyond the core count, all core
// sources plus the first test-only sources.
std::vector<std::string> default_classes(const Manifest& manifest, std::size_t n);

FewShotEpisode make_episode(const Manifest& manifest, std::size_t k, std::size_t n, std::uint64_t seed,
                            const EpisodeOptions& options = {});

// ---------------------------------------------------------------------------
// Methods

enum class MethodKind { resynthesis, mlp, centroid };

std::string_view method_id(MethodKind kind) noexcept;     // "resynthesis", "mlp", "centroid"
std::string_view method_label(MethodKind kind) noexcept;  // row label in reports
MethodKind parse_method(std::string_view name);

// ---------------------------------------------------------------------------
// Reports

struct ReportCell {
  std::string method;     // method id
  std::string condition;  // column key
  std::vector<double> values;  // one per repetition
  double mean = 0.0;
  bool absent = false;    // condition could not be evaluated
  std::size_t errors = 0; // images skipped for missing features, summed over repetitions

  std::size_t repetitions() const noexcept { return values.size(); }
};

struct ExperimentReport {
  std::string task;                     // "few-shot", "plain", "robust"
  std::vector<std::string> methods;     // row order (method ids)
  std::vector<std::string> conditions;  // column order
  std::vector<ReportCell> cells;        // row-major over methods x conditions
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  const ReportCell* find(std::string_view method, std::string_view condition) const;
};

double mean_of(std::span<const double> values);

// One row per method, one column per condition; absent cells are empty.
void write_csv(const ExperimentReport& report, std::ostream& out);
nlohmann::ordered_json to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::ordered_json& j);
void save_report(const ExperimentReport& report, const std::filesystem::path& csv,
                 const std::filesystem::path& json);
ExperimentReport load_report(const std::filesystem::path& json);

// Column keys of the plain/robust table: "plain" followed by the ten
// operators in display order.
std::vector<std::string> table_conditions();
std::string few_shot_condition(std::size_t n, std::size_t k);  // "n10_k05"

// ---------------------------------------------------------------------------
// Tasks

struct TaskOptions {
  std::vector<MethodKind> methods{MethodKind::resynthesis, MethodKind::mlp, MethodKind::centroid};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  DistanceKind distance = DistanceKind::euclidean();
  MlpConfig mlp;  // seed is replaced per repetition
  std::size_t jobs = 1;
};

struct FewShotOptions : TaskOptions {
  std::vector<std::size_t> shots{1, 2, 3, 5, 7, 10, 15, 20};
  std::vector<std::size_t> classes{5, 8, 10, 12, 14};
  FewShotOptions() { mlp = MlpConfig::few_shot(); }
};

// Episodes over every character of the manifest; the test characters stay
// fixed across the shot grid.
ExperimentReport run_few_shot(const Manifest& manifest, const FeatureStore& store,
                              const FewShotOptions& options);
// Training data: resyntheses of the train split; validation: resyntheses of
// the val split; queries: originals of the test split.
ExperimentReport run_plain(const Manifest& manifest, const FeatureStore& store, const TaskOptions& options);
// `perturbed` maps operator name to a store of post-processed test-original
// features; a missing operator yields an absent column.
ExperimentReport run_robust(const Manifest& manifest, const FeatureStore& store,
                            const std::map<std::string, const FeatureStore*>& perturbed,
                            const TaskOptions& options);

}  // namespace resynth
