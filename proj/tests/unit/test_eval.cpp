#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "resynth/eval.hpp"
#include "resynth/simulator.hpp"

using namespace resynth;

namespace {

SimulatorConfig small_sim(std::size_t characters = 30) {
  SimulatorConfig cfg;
  cfg.dim = 16;
  cfg.characters = characters;
  return cfg;
}

TaskOptions quick_options() {
  TaskOptions o;
  o.seeds = {0, 1};
  o.mlp.hidden_layers = {16};
  o.mlp.max_epochs = 40;
  o.mlp.learning_rate = 1e-2;
  return o;
}

const SyntheticDataset& dataset() {
  static const SyntheticDataset d = generate_synthetic_dataset(small_sim());
  return d;
}

}  // namespace

TEST(Accuracy, HandComputed) {
  const std::vector<std::pair<std::string, std::string>> p{
      {"a", "a"}, {"b", "a"}, {"c", "c"}, {"a", "b"}, {"d", "e"}};
  EXPECT_DOUBLE_EQ(accuracy(p), 0.4);
  EXPECT_THROW(accuracy(std::span<const std::pair<std::string, std::string>>{}), LookupError);
}

TEST(MeanOf, Basic) {
  const std::vector<double> v{0.25, 0.5, 0.75};
  EXPECT_DOUBLE_EQ(mean_of(v), 0.5);
}

TEST(Episode, BalancedAndDisjoint) {
  const Manifest& m = dataset().manifest;
  for (std::size_t k : {1u, 3u, 7u}) {
    const FewShotEpisode ep = make_episode(m, k, 5, 11);
    EXPECT_EQ(ep.train_characters.size(), k);
    EXPECT_EQ(ep.test_characters.size(), 30u - k);
    std::vector<CharacterId> both;
    std::set_intersection(ep.train_characters.begin(), ep.train_characters.end(), ep.test_characters.begin(),
                          ep.test_characters.end(), std::back_inserter(both));
    EXPECT_TRUE(both.empty());
    std::map<std::string, std::size_t> per_class;
    for (const auto& item : ep.train_items) {
      ++per_class[item.source];
      const ImageRecord* img = m.find_image(item.image);
      ASSERT_NE(img, nullptr);
      EXPECT_EQ(img->kind, ImageKind::resynthesis);
      EXPECT_EQ(img->source, item.source);
      EXPECT_TRUE(std::binary_search(ep.train_characters.begin(), ep.train_characters.end(), img->character));
    }
    EXPECT_EQ(per_class.size(), 5u);
    for (const auto& [cls, count] : per_class) EXPECT_EQ(count, k);
    std::map<std::string, std::size_t> test_per_class;
    for (const auto& item : ep.test_items) {
      ++test_per_class[item.source];
      EXPECT_EQ(m.find_image(item.image)->kind, ImageKind::original);
    }
    for (const auto& [cls, count] : test_per_class) EXPECT_EQ(count, 30u - k);
  }
}

TEST(Episode, ConstantPredictorScoresOneOverN) {
  const FewShotEpisode ep = make_episode(dataset().manifest, 2, 8, 3);
  std::vector<std::pair<std::string, std::string>> p;
  for (const auto& item : ep.test_items) p.emplace_back(ep.classes.front(), item.source);
  EXPECT_DOUBLE_EQ(accuracy(p), 1.0 / 8.0);
}

TEST(Episode, ReserveFixesTestSetAcrossShots) {
  EpisodeOptions opt;
  opt.reserve = 20;
  const FewShotEpisode a = make_episode(dataset().manifest, 1, 5, 4, opt);
  const FewShotEpisode b = make_episode(dataset().manifest, 20, 5, 4, opt);
  EXPECT_EQ(a.test_characters, b.test_characters);
  EXPECT_EQ(a.test_items, b.test_items);
  EXPECT_TRUE(std::includes(b.train_characters.begin(), b.train_characters.end(), a.train_characters.begin(),
                            a.train_characters.end()));
}

TEST(Episode, DeterministicPerSeed) {
  const FewShotEpisode a = make_episode(dataset().manifest, 3, 5, 9);
  const FewShotEpisode b = make_episode(dataset().manifest, 3, 5, 9);
  const FewShotEpisode c = make_episode(dataset().manifest, 3, 5, 10);
  EXPECT_EQ(a.train_items, b.train_items);
  EXPECT_NE(a.train_characters, c.train_characters);
}

TEST(Episode, TooManyShotsIsAnError) {
  EXPECT_THROW(make_episode(dataset().manifest, 30, 5, 0), ConfigError);
  EXPECT_THROW(make_episode(dataset().manifest, 0, 5, 0), ConfigError);
  EXPECT_THROW(make_episode(dataset().manifest, 3, 11, 0), ConfigError);
}

TEST(Episode, ExplicitClassList) {
  EpisodeOptions opt;
  opt.classes = {"Midjourney", "Bing"};
  const FewShotEpisode ep = make_episode(dataset().manifest, 2, 2, 0, opt);
  EXPECT_EQ(ep.classes, (std::vector<std::string>{"Bing", "Midjourney"}));
  opt.classes = {"Bing", "Nonexistent"};
  EXPECT_THROW(make_episode(dataset().manifest, 2, 2, 0, opt), LookupError);
}

TEST(DefaultClasses, ExtensionSourcesBeyondTheCore) {
  const Manifest ext = resynth::testing::extended_test_manifest();
  const auto ten = default_classes(ext, 10);
  for (const auto& c : ten) EXPECT_FALSE(ext.find_source(c)->extension_only);
  for (std::size_t n : {12u, 14u}) {
    const auto cls = default_classes(ext, n);
    EXPECT_EQ(cls.size(), n);
    EXPECT_TRUE(std::is_sorted(cls.begin(), cls.end()));
    std::size_t extension = 0;
    for (const auto& c : cls) extension += ext.find_source(c)->extension_only;
    EXPECT_EQ(extension, n - 10);
  }
  EXPECT_THROW(default_classes(dataset().manifest, 12), ConfigError);
}

TEST(FewShot, ResynthesisIsConstantAcrossShots) {
  FewShotOptions opt;
  static_cast<TaskOptions&>(opt) = quick_options();
  opt.mlp = MlpConfig::few_shot();
  opt.mlp.hidden_layers = {16};
  opt.mlp.max_epochs = 20;
  opt.shots = {1, 2, 5};
  opt.classes = {5, 10};
  const ExperimentReport r = run_few_shot(dataset().manifest, dataset().store, opt);
  EXPECT_EQ(r.conditions.size(), 6u);
  for (std::size_t n : {5u, 10u}) {
    const ReportCell* first = r.find("resynthesis", few_shot_condition(n, 1));
    ASSERT_NE(first, nullptr);
    for (std::size_t k : {2u, 5u}) EXPECT_EQ(r.find("resynthesis", few_shot_condition(n, k))->values, first->values);
  }
  for (const auto& cell : r.cells) {
    EXPECT_EQ(cell.repetitions(), 2u);
    EXPECT_NEAR(cell.mean, mean_of(cell.values), 1e-12);
  }
}

TEST(FewShot, ConditionKeys) {
  EXPECT_EQ(few_shot_condition(10, 5), "n10_k05");
  EXPECT_EQ(few_shot_condition(14, 20), "n14_k20");
}

TEST(Table, ElevenColumns) {
  const auto cols = table_conditions();
  ASSERT_EQ(cols.size(), 11u);
  EXPECT_EQ(cols.front(), "plain");
}

TEST(Plain, OnlyPlainColumnIsPresent) {
  const ExperimentReport r = run_plain(dataset().manifest, dataset().store, quick_options());
  EXPECT_EQ(r.task, "plain");
  EXPECT_EQ(r.methods.size(), 3u);
  EXPECT_EQ(r.conditions.size(), 11u);
  for (const auto& cell : r.cells) {
    if (cell.condition == "plain") {
      EXPECT_FALSE(cell.absent);
      EXPECT_EQ(cell.repetitions(), 2u);
      EXPECT_NEAR(cell.mean, mean_of(cell.values), 1e-12);
    } else {
      EXPECT_TRUE(cell.absent);
    }
  }
}

TEST(Robust, IdentityPerturbationReproducesPlain) {
  std::map<std::string, const FeatureStore*> perturbed;
  for (const auto& op : table_conditions())
    if (op != "plain") perturbed[op] = &dataset().store;
  const ExperimentReport r = run_robust(dataset().manifest, dataset().store, perturbed, quick_options());
  for (const auto& method : r.methods) {
    const ReportCell* plain = r.find(method, "plain");
    for (const auto& op : r.conditions) {
      const ReportCell* cell = r.find(method, op);
      ASSERT_FALSE(cell->absent);
      EXPECT_EQ(cell->values, plain->values) << method << " " << op;
    }
  }
}

TEST(Robust, MissingOperatorIsAbsentColumn) {
  std::map<std::string, const FeatureStore*> perturbed{{"jpeg", &dataset().store}};
  TaskOptions o = quick_options();
  o.methods = {MethodKind::resynthesis};
  const ExperimentReport r = run_robust(dataset().manifest, dataset().store, perturbed, o);
  EXPECT_FALSE(r.find("resynthesis", "jpeg")->absent);
  EXPECT_TRUE(r.find("resynthesis", "blur")->absent);
  std::ostringstream csv;
  write_csv(r, csv);
  std::string header, row;
  std::istringstream in(csv.str());
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 11);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 11);
  EXPECT_NE(row.find(",,"), std::string::npos);
}

TEST(Robust, MoreNoiseNeverHelpsResynthesis) {
  SimulatorConfig cfg = small_sim(60);
  const Simulator sim(cfg);
  const SyntheticDataset data = generate_synthetic_dataset(cfg);
  TaskOptions o = quick_options();
  o.methods = {MethodKind::resynthesis};
  o.seeds = {0};
  double previous = 2.0;
  for (double scale : {0.0, 0.3, 1.0, 3.0}) {
    const FeatureStore p = perturbed_store(sim, data.manifest, data.store, "blur", scale);
    const ExperimentReport r = run_robust(data.manifest, data.store, {{"blur", &p}}, o);
    const double acc = r.find("resynthesis", "blur")->mean;
    EXPECT_LE(acc, previous + 0.05) << "scale " << scale;
    previous = acc;
  }
  EXPECT_LT(previous, 0.5);
}

TEST(Report, JsonRoundTripAndFiles) {
  const ExperimentReport r = run_plain(dataset().manifest, dataset().store, quick_options());
  const ExperimentReport back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(back.task, r.task);
  EXPECT_EQ(back.methods, r.methods);
  EXPECT_EQ(back.conditions, r.conditions);
  ASSERT_EQ(back.cells.size(), r.cells.size());
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    EXPECT_EQ(back.cells[i].values, r.cells[i].values);
    EXPECT_EQ(back.cells[i].absent, r.cells[i].absent);
  }
  const auto dir = std::filesystem::temp_directory_path() / "resynth_report_test";
  std::filesystem::create_directories(dir);
  save_report(r, dir / "r.csv", dir / "r.json");
  const ExperimentReport loaded = load_report(dir / "r.json");
  EXPECT_EQ(to_json(loaded).dump(), to_json(r).dump());
  std::ostringstream a;
  write_csv(r, a);
  std::ifstream f(dir / "r.csv");
  std::stringstream b;
  b << f.rdbuf();
  EXPECT_EQ(a.str(), b.str());
  std::filesystem::remove_all(dir);
}

TEST(Methods, NamesRoundTrip) {
  for (MethodKind m : {MethodKind::resynthesis, MethodKind::mlp, MethodKind::centroid})
    EXPECT_EQ(parse_method(method_id(m)), m);
  EXPECT_THROW(parse_method("svm"), Error);
}

TEST(Tasks, JobsDoNotChangeReports) {
  TaskOptions a = quick_options(), b = quick_options();
  b.jobs = 4;
  EXPECT_EQ(to_json(run_plain(dataset().manifest, dataset().store, a)).dump(),
            to_json(run_plain(dataset().manifest, dataset().store, b)).dump());
}
