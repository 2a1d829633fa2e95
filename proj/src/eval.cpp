#include "resynth/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "resynth/attribution.hpp"
#include "resynth/hash.hpp"
#include "resynth/parallel.hpp"
#include "resynth/perturb.hpp"

namespace resynth {

double accuracy(std::span<const std::pair<std::string, std::string>> predictions) {
  if (predictions.empty()) throw LookupError("accuracy of an empty prediction list");
  std::size_t hits = 0;
  for (const auto& [pred, truth] : predictions)
    if (pred == truth) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

// ---------------------------------------------------------------------------

std::vector<std::string> default_classes(const Manifest& manifest, std::size_t n) {
  std::vector<std::string> core, extra;
  for (const auto& s : manifest.sources()) (s.extension_only ? extra : core).push_back(s.name);
  if (manifest.is_extended() == false) extra.clear();
  if (n > core.size() + extra.size())
    throw ConfigError("requested " + std::to_string(n) + " classes but only " +
                      std::to_string(core.size() + extra.size()) + " sources are available");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n && i < core.size(); ++i) out.push_back(core[i]);
  for (std::size_t i = 0; out.size() < n; ++i) out.push_back(extra[i]);
  std::sort(out.begin(), out.end());
  return out;
}

FewShotEpisode make_episode(const Manifest& manifest, std::size_t k, std::size_t n, std::uint64_t seed,
                            const EpisodeOptions& options) {
  if (k == 0) throw ConfigError("episodes need at least one shot");
  if (n == 0) throw ConfigError("episodes need at least one class");

  std::vector<std::string> classes = options.classes;
  if (classes.empty()) {
    classes = default_classes(manifest, n);
  } else {
    std::sort(classes.begin(), classes.end());
    if (std::adjacent_find(classes.begin(), classes.end()) != classes.end())
      throw ConfigError("class list repeats a source");
    if (classes.size() != n) throw ConfigError("class list size differs from n");
    for (const auto& c : classes)
      if (!manifest.find_source(c)) throw LookupError("unknown source '" + c + "'");
  }

  std::vector<CharacterId> chars = manifest.characters();
  const std::size_t reserve = options.reserve.value_or(k);
  if (reserve < k) throw ConfigError("reserve must be at least the shot count");
  if (reserve >= chars.size())
    throw ConfigError("not enough characters: " + std::to_string(chars.size()) + " available, " +
                      std::to_string(reserve) + " reserved for training leaves no test characters");

  CounterRng rng(hash_key("episode", seed));
  seeded_shuffle(chars.begin(), chars.end(), rng);

  FewShotEpisode ep;
  ep.shots = k;
  ep.n_classes = n;
  ep.seed = seed;
  ep.classes = classes;
  ep.train_characters.assign(chars.begin(), chars.begin() + static_cast<std::ptrdiff_t>(k));
  ep.test_characters.assign(chars.begin() + static_cast<std::ptrdiff_t>(reserve), chars.end());
  std::sort(ep.train_characters.begin(), ep.train_characters.end());
  std::sort(ep.test_characters.begin(), ep.test_characters.end());

  const std::set<std::string> class_set(classes.begin(), classes.end());
  const std::set<CharacterId> train_set(ep.train_characters.begin(), ep.train_characters.end());
  const std::set<CharacterId> test_set(ep.test_characters.begin(), ep.test_characters.end());

  // Candidate resyntheses per (character, generator) whose described
  // original belongs to one of the classes.
  std::map<std::pair<CharacterId, std::string>, std::vector<std::string>> candidates;
  for (const ImageRecord* orig : manifest.originals()) {
    if (!class_set.contains(orig->source)) continue;
    if (train_set.contains(orig->character)) {
      for (const ImageRecord* child : manifest.children_of(orig->id))
        if (class_set.contains(child->source)) candidates[{child->character, child->source}].push_back(child->id);
    } else if (test_set.contains(orig->character)) {
      ep.test_items.push_back({orig->id, orig->source});
    }
  }

  for (const auto& cls : classes) {
    for (CharacterId c : ep.train_characters) {
      auto it = candidates.find({c, cls});
      if (it == candidates.end() || it->second.empty())
        throw ConfigError("character " + std::to_string(c) + " has no resynthesis by '" + cls + "'");
      auto& ids = it->second;
      std::sort(ids.begin(), ids.end());
      CounterRng pick(hash_key("episode-draw", seed, c, cls));
      ep.train_items.push_back({ids[pick.below(ids.size())], cls});
    }
  }
  if (ep.test_items.empty()) throw ConfigError("episode has no test items");
  return ep;
}

// ---------------------------------------------------------------------------

std::string_view method_id(MethodKind kind) noexcept {
  switch (kind) {
    case MethodKind::resynthesis: return "resynthesis";
    case MethodKind::mlp: return "mlp";
    case MethodKind::centroid: return "centroid";
  }
  return "?";
}

std::string_view method_label(MethodKind kind) noexcept {
  switch (kind) {
    case MethodKind::resynthesis: return "Resynthesis";
    case MethodKind::mlp: return "MLP";
    case MethodKind::centroid: return "Nearest centroid (SVM stand-in)";
  }
  return "?";
}

MethodKind parse_method(std::string_view name) {
  for (MethodKind k : {MethodKind::resynthesis, MethodKind::mlp, MethodKind::centroid})
    if (method_id(k) == name) return k;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

const ReportCell* ExperimentReport::find(std::string_view method, std::string_view condition) const {
  for (const auto& c : cells)
    if (c.method == method && c.condition == condition) return &c;
  return nullptr;
}

std::vector<std::string> table_conditions() {
  std::vector<std::string> out{"plain"};
  for (Operator op : kOperators) out.emplace_back(to_string(op));
  return out;
}

std::string few_shot_condition(std::size_t n, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "n%02zu_k%02zu", n, k);
  return buf;
}

namespace {

std::string column_title(const ExperimentReport& report, const std::string& condition) {
  if (report.task == "few-shot") return condition;
  if (condition == "plain") return "Plain";
  try {
    return std::string(display_name(parse_operator(condition)));
  } catch (const Error&) {
    return condition;
  }
}

std::string row_title(const std::string& method) {
  try {
    return std::string(method_label(parse_method(method)));
  } catch (const Error&) {
    return method;
  }
}

}  // namespace

void write_csv(const ExperimentReport& report, std::ostream& out) {
  out << "method";
  for (const auto& c : report.conditions) out << ',' << column_title(report, c);
  out << '\n';
  for (const auto& m : report.methods) {
    out << row_title(m);
    for (const auto& c : report.conditions) {
      out << ',';
      const ReportCell* cell = report.find(m, c);
      if (!cell || cell->absent) continue;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", cell->mean);
      out << buf;
    }
    out << '\n';
  }
}

nlohmann::ordered_json to_json(const ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["task"] = report.task;
  j["methods"] = report.methods;
  j["conditions"] = report.conditions;
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : report.cells) {
    nlohmann::ordered_json e;
    e["method"] = c.method;
    e["condition"] = c.condition;
    e["absent"] = c.absent;
    e["repetitions"] = c.repetitions();
    e["mean"] = c.mean;
    e["values"] = c.values;
    e["errors"] = c.errors;
    cells.push_back(std::move(e));
  }
  j["cells"] = std::move(cells);
  j["metadata"] = report.metadata;
  return j;
}

ExperimentReport report_from_json(const nlohmann::ordered_json& j) {
  ExperimentReport r;
  try {
    r.task = j.at("task").get<std::string>();
    r.methods = j.at("methods").get<std::vector<std::string>>();
    r.conditions = j.at("conditions").get<std::vector<std::string>>();
    for (const auto& e : j.at("cells")) {
      ReportCell c;
      c.method = e.at("method").get<std::string>();
      c.condition = e.at("condition").get<std::string>();
      c.absent = e.at("absent").get<bool>();
      c.values = e.at("values").get<std::vector<double>>();
      c.mean = e.at("mean").get<double>();
      c.errors = e.value("errors", std::size_t{0});
      if (e.at("repetitions").get<std::size_t>() != c.values.size())
        throw FormatError("cell repetition count disagrees with its values", 0);
      r.cells.push_back(std::move(c));
    }
    if (j.contains("metadata")) r.metadata = j.at("metadata");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what(), 0);
  }
  return r;
}

void save_report(const ExperimentReport& report, const std::filesystem::path& csv,
                 const std::filesystem::path& json) {
  {
    std::ofstream out(csv, std::ios::binary);
    if (!out) throw Error("cannot write '" + csv.string() + "'");
    write_csv(report, out);
  }
  std::ofstream out(json, std::ios::binary);
  if (!out) throw Error("cannot write '" + json.string() + "'");
  out << to_json(report).dump(2) << '\n';
}

ExperimentReport load_report(const std::filesystem::path& json) {
  std::ifstream in(json);
  if (!in) throw Error("cannot open report '" + json.string() + "'");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("report is not valid JSON: ") + e.what(), e.byte);
  }
  return report_from_json(j);
}

// ---------------------------------------------------------------------------

namespace {

struct Tally {
  std::size_t hits = 0;
  std::size_t total = 0;
  std::size_t errors = 0;
};

LabeledSet gather(const FeatureStore& store, std::span<const LabeledItem> items, std::size_t& missing) {
  LabeledSet out;
  out.reserve(items.size());
  for (const auto& it : items) {
    if (const FeatureVector* v = store.find(it.image))
      out.emplace_back(*v, it.source);
    else
      ++missing;
  }
  return out;
}

// A fitted predictor for one method; resynthesis needs no fitting.
struct Fitted {
  MethodKind kind = MethodKind::resynthesis;
  std::optional<MlpModel> mlp;
  std::optional<CentroidModel> centroid;
};

Fitted fit(MethodKind kind, const LabeledSet& train, const LabeledSet& val, const MlpConfig& mlp,
           std::uint64_t seed) {
  Fitted f;
  f.kind = kind;
  if (kind == MethodKind::mlp) {
    MlpConfig cfg = mlp;
    cfg.seed = seed;
    f.mlp = train_mlp(train, val, cfg).model;
  } else if (kind == MethodKind::centroid) {
    f.centroid = train_centroid(train);
  }
  return f;
}

// Scores the test originals. Panels (resynthesis) come from `panels`,
// query vectors from `queries`.
Tally score(const Fitted& f, const Manifest& manifest, const FeatureStore& panels, const FeatureStore& queries,
            std::span<const LabeledItem> tests, const std::vector<std::string>& classes,
            const DistanceKind& kind) {
  Tally t;
  const std::set<std::string> class_set(classes.begin(), classes.end());
  for (const auto& item : tests) {
    const FeatureVector* q = queries.find(item.image);
    if (!q) {
      ++t.errors;
      continue;
    }
    std::string predicted;
    switch (f.kind) {
      case MethodKind::resynthesis: {
        std::vector<PanelEntry> panel;
        for (const ImageRecord* child : manifest.children_of(item.image)) {
          if (!class_set.contains(child->source)) continue;
          if (const FeatureVector* v = panels.find(child->id)) panel.push_back({child->source, v->values()});
        }
        if (panel.empty()) {
          ++t.errors;
          continue;
        }
        predicted = attribute(q->values(), panel, kind).predicted;
        break;
      }
      case MethodKind::mlp:
        predicted = predict_mlp(*f.mlp, q->values()).label;
        break;
      case MethodKind::centroid:
        predicted = predict_centroid(*f.centroid, q->values(), kind);
        break;
    }
    ++t.total;
    if (predicted == item.source) ++t.hits;
  }
  return t;
}

nlohmann::ordered_json base_metadata(const std::string& task, const FeatureStore& store, const TaskOptions& o) {
  nlohmann::ordered_json m;
  m["task"] = task;
  m["task_number"] = task == "few-shot" ? "T1" : task == "plain" ? "T2" : "T3";
  m["task_numbering_note"] = "T1 few-shot, T2 plain, T3 robust";
  m["distance_kind"] = o.distance.name();
  m["dim"] = store.dim();
  m["seeds"] = o.seeds;
  auto methods = nlohmann::ordered_json::object();
  for (MethodKind k : o.methods) methods[std::string(method_id(k))] = method_label(k);
  m["methods"] = std::move(methods);
  nlohmann::ordered_json mlp;
  mlp["hidden_layers"] = o.mlp.hidden_layers;
  mlp["learning_rate"] = o.mlp.learning_rate;
  mlp["weight_decay"] = o.mlp.weight_decay;
  mlp["decay_mode"] = o.mlp.decay_mode == DecayMode::decoupled ? "decoupled" : "coupled";
  mlp["max_epochs"] = o.mlp.max_epochs;
  mlp["patience"] = o.mlp.patience;
  mlp["tolerance"] = o.mlp.tolerance;
  mlp["batch_size"] = o.mlp.batch_size;
  m["mlp"] = std::move(mlp);
  return m;
}

void check_options(const TaskOptions& o) {
  if (o.methods.empty()) throw ConfigError("no methods selected");
  if (o.seeds.empty()) throw ConfigError("no repetition seeds");
  std::set<MethodKind> seen(o.methods.begin(), o.methods.end());
  if (seen.size() != o.methods.size()) throw ConfigError("method list repeats an entry");
}

void finish_cell(ReportCell& c, const std::vector<Tally>& tallies) {
  c.values.clear();
  c.errors = 0;
  for (const auto& t : tallies) {
    c.errors += t.errors;
    if (t.total == 0) {
      c.absent = true;
      continue;
    }
    c.values.push_back(static_cast<double>(t.hits) / static_cast<double>(t.total));
  }
  if (c.absent) c.values.clear();
  c.mean = mean_of(c.values);
}

}  // namespace

ExperimentReport run_few_shot(const Manifest& manifest, const FeatureStore& store,
                              const FewShotOptions& options) {
  check_options(options);
  if (options.shots.empty() || options.classes.empty()) throw ConfigError("empty shot or class grid");
  std::vector<std::size_t> shots = options.shots;
  std::sort(shots.begin(), shots.end());
  shots.erase(std::unique(shots.begin(), shots.end()), shots.end());
  std::vector<std::size_t> classes = options.classes;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const std::size_t reserve = shots.back();

  ExperimentReport report;
  report.task = "few-shot";
  for (MethodKind m : options.methods) report.methods.emplace_back(method_id(m));
  for (std::size_t n : classes)
    for (std::size_t k : shots) report.conditions.push_back(few_shot_condition(n, k));

  // Episodes are shared by every method within a repetition.
  struct Job {
    std::size_t method, n, k, rep;
  };
  std::vector<FewShotEpisode> episodes;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> episode_index;
  for (std::size_t r = 0; r < options.seeds.size(); ++r)
    for (std::size_t n : classes)
      for (std::size_t k : shots) {
        episode_index[{r, n, k}] = episodes.size();
        episodes.push_back(make_episode(manifest, k, n, options.seeds[r], {reserve, {}}));
      }

  std::vector<Job> jobs;
  for (std::size_t mi = 0; mi < options.methods.size(); ++mi)
    for (std::size_t n : classes)
      for (std::size_t k : shots)
        for (std::size_t r = 0; r < options.seeds.size(); ++r) jobs.push_back({mi, n, k, r});

  std::vector<Tally> tallies(jobs.size());
  parallel_for(jobs.size(), options.jobs, [&](std::size_t i) {
    const Job& job = jobs[i];
    const FewShotEpisode& ep = episodes[episode_index.at({job.rep, job.n, job.k})];
    const MethodKind kind = options.methods[job.method];
    std::size_t missing = 0;
    Fitted f;
    f.kind = kind;
    if (kind != MethodKind::resynthesis) {
      const LabeledSet train = gather(store, ep.train_items, missing);
      std::set<std::string> covered;
      for (const auto& [v, label] : train) covered.insert(label);
      if (covered.size() != ep.classes.size()) {
        tallies[i].errors = missing;
        return;  // a class without training data leaves the cell absent
      }
      f = fit(kind, train, {}, options.mlp, hash_key("few-shot-mlp", options.seeds[job.rep], job.n, job.k));
    }
    tallies[i] = score(f, manifest, store, store, ep.test_items, ep.classes, options.distance);
    tallies[i].errors += missing;
  });

  std::size_t i = 0;
  for (std::size_t mi = 0; mi < options.methods.size(); ++mi)
    for (std::size_t n : classes)
      for (std::size_t k : shots) {
        ReportCell cell;
        cell.method = std::string(method_id(options.methods[mi]));
        cell.condition = few_shot_condition(n, k);
        std::vector<Tally> per_rep(tallies.begin() + static_cast<std::ptrdiff_t>(i),
                                   tallies.begin() + static_cast<std::ptrdiff_t>(i + options.seeds.size()));
        i += options.seeds.size();
        finish_cell(cell, per_rep);
        report.cells.push_back(std::move(cell));
      }

  report.metadata = base_metadata("few-shot", store, options);
  report.metadata["shots"] = shots;
  report.metadata["classes"] = classes;
  report.metadata["reserved_characters"] = reserve;
  auto class_lists = nlohmann::ordered_json::object();
  for (std::size_t n : classes) class_lists[std::to_string(n)] = default_classes(manifest, n);
  report.metadata["class_sources"] = std::move(class_lists);
  return report;
}

namespace {

ExperimentReport run_table(const std::string& task, const Manifest& manifest, const FeatureStore& store,
                           const std::map<std::string, const FeatureStore*>& perturbed,
                           const TaskOptions& options) {
  check_options(options);

  std::vector<std::string> classes;
  for (const auto& s : manifest.sources())
    if (!s.extension_only) classes.push_back(s.name);
  const std::set<std::string> class_set(classes.begin(), classes.end());

  std::vector<LabeledItem> train_items, val_items, test_items;
  for (const auto& img : manifest.images()) {
    if (!class_set.contains(img.source)) continue;
    const auto split = manifest.split_of(img.character);
    if (!split) continue;
    if (img.kind == ImageKind::resynthesis) {
      if (*split == Split::train) train_items.push_back({img.id, img.source});
      if (*split == Split::val) val_items.push_back({img.id, img.source});
    }
  }
  for (const ImageRecord* orig : manifest.originals(Split::test))
    if (class_set.contains(orig->source)) test_items.push_back({orig->id, orig->source});
  if (test_items.empty()) throw ConfigError("manifest has no test originals");

  std::size_t train_missing = 0, val_missing = 0;
  const LabeledSet train = gather(store, train_items, train_missing);
  const LabeledSet val = gather(store, val_items, val_missing);
  std::set<std::string> covered;
  for (const auto& [v, label] : train) covered.insert(label);
  const bool trainable = covered.size() == classes.size();

  // Both tasks share the table shape; plain leaves the operator columns absent.
  const std::vector<std::string> conditions = table_conditions();

  ExperimentReport report;
  report.task = task;
  for (MethodKind m : options.methods) report.methods.emplace_back(method_id(m));
  report.conditions = conditions;

  // Fit once per (method, seed) and reuse the model for every condition.
  const std::size_t reps = options.seeds.size();
  std::vector<std::optional<Fitted>> fitted(options.methods.size() * reps);
  parallel_for(fitted.size(), options.jobs, [&](std::size_t i) {
    const MethodKind kind = options.methods[i / reps];
    if (kind != MethodKind::resynthesis && !trainable) return;
    fitted[i] = fit(kind, train, val, options.mlp, hash_key(task, "mlp", options.seeds[i % reps]));
  });

  const std::size_t n_cond = conditions.size();
  std::vector<Tally> tallies(fitted.size() * n_cond);
  std::vector<char> absent(fitted.size() * n_cond, 0);
  parallel_for(tallies.size(), options.jobs, [&](std::size_t i) {
    const std::size_t fi = i / n_cond;
    const std::string& cond = conditions[i % n_cond];
    const FeatureStore* queries = &store;
    if (cond != "plain") {
      auto it = perturbed.find(cond);
      if (it == perturbed.end() || !it->second) {
        absent[i] = 1;
        return;
      }
      queries = it->second;
    }
    if (!fitted[fi]) {
      absent[i] = 1;
      return;
    }
    tallies[i] = score(*fitted[fi], manifest, store, *queries, test_items, classes, options.distance);
  });

  for (std::size_t mi = 0; mi < options.methods.size(); ++mi) {
    for (std::size_t ci = 0; ci < n_cond; ++ci) {
      ReportCell cell;
      cell.method = std::string(method_id(options.methods[mi]));
      cell.condition = conditions[ci];
      std::vector<Tally> per_rep;
      bool any_absent = false;
      for (std::size_t r = 0; r < reps; ++r) {
        const std::size_t idx = (mi * reps + r) * n_cond + ci;
        any_absent = any_absent || absent[idx];
        per_rep.push_back(tallies[idx]);
      }
      if (any_absent) {
        cell.absent = true;
      } else {
        finish_cell(cell, per_rep);
      }
      report.cells.push_back(std::move(cell));
    }
  }

  report.metadata = base_metadata(task, store, options);
  report.metadata["classes"] = classes;
  report.metadata["train_items"] = train.size();
  report.metadata["val_items"] = val.size();
  report.metadata["test_items"] = test_items.size();
  report.metadata["missing_training_features"] = train_missing + val_missing;
  {
    auto absent_ops = nlohmann::ordered_json::array();
    for (const auto& c : conditions)
      if (c != "plain" && (!perturbed.contains(c) || !perturbed.at(c))) absent_ops.push_back(c);
    report.metadata["absent_conditions"] = std::move(absent_ops);
  }
  return report;
}

}  // namespace

ExperimentReport run_plain(const Manifest& manifest, const FeatureStore& store, const TaskOptions& options) {
  return run_table("plain", manifest, store, {}, options);
}

ExperimentReport run_robust(const Manifest& manifest, const FeatureStore& store,
                            const std::map<std::string, const FeatureStore*>& perturbed,
                            const TaskOptions& options) {
  for (const auto& [op, s] : perturbed) parse_operator(op);
  return run_table("robust", manifest, store, perturbed, options);
}

}  // namespace resynth
