// resynth: command-line front end.
//
// Exit codes: 0 success, 1 domain violation, 2 I/O or configuration fault.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "resynth/attribution.hpp"
#include "resynth/clients.hpp"
#include "resynth/dataset.hpp"
#include "resynth/eval.hpp"
#include "resynth/features.hpp"
#include "resynth/image.hpp"
#include "resynth/metrics.hpp"
#include "resynth/parallel.hpp"
#include "resynth/perturb.hpp"
#include "resynth/simulator.hpp"

#ifndef RESYNTH_VERSION
#define RESYNTH_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace resynth;

namespace {

constexpr int kOk = 0;
constexpr int kDomain = 1;
constexpr int kFault = 2;

// Domain violations are problems with the data; everything else (missing
// files, malformed input, bad flags, unreachable services) is a fault.
int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const FormatError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const NetworkError*>(&e) || dynamic_cast<const ReplayMissError*>(&e))
    return kFault;
  if (dynamic_cast<const DimensionError*>(&e) || dynamic_cast<const LookupError*>(&e) ||
      dynamic_cast<const LeakageError*>(&e) || dynamic_cast<const SplitArityError*>(&e) ||
      dynamic_cast<const SingularityError*>(&e) || dynamic_cast<const TrainingError*>(&e) ||
      dynamic_cast<const ManifestError*>(&e) || dynamic_cast<const NonFiniteError*>(&e) ||
      dynamic_cast<const OperatorError*>(&e) || dynamic_cast<const RefusalError*>(&e) ||
      dynamic_cast<const OverlengthError*>(&e))
    return kDomain;
  return kFault;
}

// Removes everything it created unless commit() is called.
class OutputGuard {
 public:
  OutputGuard() = default;
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) fs::remove_all(*it, ec);
  }

  // Creates `dir` if needed; a fresh directory is removed wholesale on failure.
  void directory(const fs::path& dir) {
    if (fs::exists(dir)) {
      if (!fs::is_directory(dir)) throw Error("'" + dir.string() + "' exists and is not a directory");
      return;
    }
    fs::path missing = dir;
    while (!missing.parent_path().empty() && !fs::exists(missing.parent_path())) missing = missing.parent_path();
    fs::create_directories(dir);
    created_.push_back(missing);
  }
  const fs::path& file(const fs::path& p) {
    created_.push_back(p);
    return p;
  }
  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> created_;
  bool committed_ = false;
};

std::string file_digest(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error("failed writing '" + p.string() + "'");
}

std::optional<Split> parse_split_selector(const std::string& s) {
  if (s == "all") return std::nullopt;
  return parse_split(s);
}

struct DistanceFlags {
  std::string kind = "euclidean";
  double shrinkage = kDefaultShrinkage;
  std::string precision = "diagonal";
};

void add_distance_flags(CLI::App* app, DistanceFlags& d) {
  app->add_option("--distance", d.kind, "euclidean, manhattan, cosine or mahalanobis")
      ->check(CLI::IsMember({"euclidean", "manhattan", "cosine", "mahalanobis"}));
  app->add_option("--shrinkage", d.shrinkage, "covariance shrinkage for mahalanobis")->check(CLI::Range(0.0, 1.0));
  app->add_option("--precision", d.precision, "diagonal or full precision for mahalanobis")
      ->check(CLI::IsMember({"diagonal", "full"}));
}

// Mahalanobis precision comes from the resynthesis features of `pool_split`.
DistanceKind make_distance(const DistanceFlags& d, const Manifest& m, const FeatureStore& store,
                           std::optional<Split> pool_split) {
  if (d.kind != "mahalanobis") return DistanceKind::parse(d.kind);
  const auto pool = resynthesis_pool(m, store, pool_split);
  const PrecisionMode mode = d.precision == "full" ? PrecisionMode::full : PrecisionMode::diagonal;
  return DistanceKind::mahalanobis(estimate_precision(pool, d.shrinkage, mode));
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream ss;
  for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? "," : "") << v[i];
  return ss.str();
}

// ---------------------------------------------------------------------------

int cmd_validate(const std::string& path) {
  const Manifest m = load_manifest(fs::path(path));
  const ValidationReport r = validate_manifest(m);
  std::cout << "originals " << r.originals << "\nresyntheses " << r.resyntheses << '\n';
  for (const auto& [split, c] : r.per_split)
    std::cout << to_string(split) << " originals " << c.originals << " resyntheses " << c.resyntheses << '\n';
  for (const auto& v : r.violations) std::cout << "violation: " << v.message() << '\n';
  std::cout << (r.valid() ? "valid" : "invalid") << '\n';
  return r.valid() ? kOk : kDomain;
}

struct EmbedFlags {
  std::string manifest, out, backend = "hash", content_root = ".", endpoints, cassette, cassette_mode = "replay";
  std::size_t dim = kDefaultFeatureDim;
  std::uint64_t seed = 0;
};

int cmd_embed(const EmbedFlags& f, std::size_t jobs) {
  const Manifest m = load_manifest(fs::path(f.manifest));
  std::vector<EmbedRequest> requests;
  for (const auto& img : m.images()) requests.push_back({img.id, img.content_ref});

  std::unique_ptr<EmbeddingBackend> backend;
  std::unique_ptr<HttplibTransport> transport;
  std::unique_ptr<FixtureCassette> cassette;
  std::unique_ptr<ServiceClient> client;
  if (f.backend == "hash") {
    backend = std::make_unique<HashEmbeddingBackend>(f.dim, f.seed);
  } else {
    if (f.endpoints.empty()) throw ConfigError("--endpoints is required for the http backend");
    const ServiceConfig cfg = load_service_config(f.endpoints);
    if (!cfg.embed) throw ConfigError("endpoint config has no embed endpoint");
    const CassetteMode mode = f.cassette.empty() ? CassetteMode::passthrough : parse_cassette_mode(f.cassette_mode);
    if (!f.cassette.empty())
      cassette = std::make_unique<FixtureCassette>(mode == CassetteMode::record && !fs::exists(f.cassette)
                                                       ? FixtureCassette(mode)
                                                       : FixtureCassette::load(fs::path(f.cassette), mode));
    if (mode != CassetteMode::replay) transport = std::make_unique<HttplibTransport>();
    client = std::make_unique<ServiceClient>(transport.get(), cassette.get());
    auto http = std::make_unique<HttpEmbeddingBackend>(*client, *cfg.embed, f.dim);
    if (mode != CassetteMode::replay) http->check_health();
    backend = std::move(http);
  }

  OutputGuard guard;
  const EmbedBatchResult res = embed_batch(*backend, requests, directory_resolver(f.content_root), jobs);
  for (const auto& e : res.errors) std::cerr << "embed error: " << e.id << ": " << e.message << '\n';
  if (!fs::path(f.out).parent_path().empty()) guard.directory(fs::path(f.out).parent_path());
  save_store(res.store, guard.file(f.out));
  if (cassette && cassette->mode() == CassetteMode::record) cassette->save(fs::path(f.cassette));
  guard.commit();
  std::cout << "embedded " << res.store.size() << " of " << requests.size() << " images (dim " << backend->dim()
            << ", model " << backend->model() << ")\n";
  return kOk;
}

struct SimulateFlags {
  std::string out, config, sources;
  std::optional<std::size_t> characters, dim;
  std::optional<double> alpha, beta, sigma, spread;
  std::optional<std::uint64_t> seed;
  bool perturbed = false;
};

int cmd_simulate(const SimulateFlags& f, std::size_t jobs) {
  SimulatorConfig c = f.config.empty() ? SimulatorConfig{} : load_simulator_config(f.config);
  if (f.characters) c.characters = *f.characters;
  if (f.dim) c.dim = *f.dim;
  if (f.alpha) c.fingerprint_strength = *f.alpha;
  if (f.beta) c.caption_drift = *f.beta;
  if (f.sigma) c.noise = *f.sigma;
  if (f.spread) c.semantic_spread = *f.spread;
  if (f.seed) c.seed = *f.seed;
  if (!f.sources.empty()) {
    c.sources.clear();
    std::vector<SourceId> ids;
    if (f.sources == "core") ids = core_sources();
    else if (f.sources == "extended") ids = all_sources();
    else throw ConfigError("--sources must be core or extended");
    for (auto& id : ids) c.sources.push_back({std::move(id), std::nullopt});
  }
  if (f.characters && !f.config.empty()) c.split.reset();
  c.validate();

  const SyntheticDataset ds = generate_synthetic_dataset(c, jobs);
  const ValidationReport report = validate_manifest(ds.manifest);
  if (!report.valid()) throw ManifestError("simulated manifest failed validation");

  OutputGuard guard;
  const fs::path out(f.out);
  guard.directory(out);
  save_manifest(ds.manifest, guard.file(out / "manifest.jsonl"));
  save_store(ds.store, guard.file(out / "features.rfs"));
  write_text(guard.file(out / "simulator.json"), c.to_json().dump(2) + "\n");
  if (f.perturbed) {
    const Simulator sim(c);
    const auto noise = c.operator_noise.empty() ? default_operator_noise() : c.operator_noise;
    guard.directory(out / "perturbed");
    for (const auto& [op, scale] : noise) {
      parse_operator(op);
      save_store(perturbed_store(sim, ds.manifest, ds.store, op, scale), guard.file(out / "perturbed" / (op + ".rfs")));
    }
  }
  guard.commit();
  std::cout << "originals " << report.originals << " resyntheses " << report.resyntheses << " dim " << c.dim << '\n';
  return kOk;
}

struct PerturbFlags {
  std::string manifest, content_root = ".", out, ops = "all", split = "test";
  std::uint64_t seed = 0;
};

int cmd_perturb(const PerturbFlags& f, std::size_t jobs) {
  const Manifest m = load_manifest(fs::path(f.manifest));
  std::vector<Operator> ops;
  if (f.ops == "all") {
    ops.assign(kOperators.begin(), kOperators.end());
  } else {
    std::stringstream ss(f.ops);
    for (std::string tok; std::getline(ss, tok, ',');) ops.push_back(parse_operator(tok));
  }
  const auto targets = m.originals(parse_split_selector(f.split));

  OutputGuard guard;
  const fs::path out(f.out);
  guard.directory(out);
  std::vector<PerturbDraw> draws;
  for (Operator op : ops) {
    guard.directory(out / std::string(to_string(op)));
    const PerturbSpec spec = PerturbSpec::defaults(op, f.seed);
    std::vector<PerturbDraw> op_draws(targets.size());
    parallel_for(targets.size(), jobs, [&](std::size_t i) {
      const ImageRecord& img = *targets[i];
      const Image src = read_image(fs::path(f.content_root) / img.content_ref);
      op_draws[i] = sample_params(spec, img.id);
      write_png(apply(src, op_draws[i]), out / std::string(to_string(op)) / (img.id + ".png"));
    });
    draws.insert(draws.end(), op_draws.begin(), op_draws.end());
  }
  std::ofstream d(guard.file(out / "draws.jsonl"), std::ios::binary);
  write_draws(draws, d);
  d.close();
  guard.commit();
  std::cout << "perturbed " << targets.size() << " images with " << ops.size() << " operators\n";
  return kOk;
}

struct AttributeFlags {
  std::string manifest, store, query_store, out, split = "test";
  DistanceFlags distance;
};

int cmd_attribute(const AttributeFlags& f, std::size_t jobs) {
  const Manifest m = load_manifest(fs::path(f.manifest));
  const FeatureStore store = load_store(fs::path(f.store));
  std::optional<FeatureStore> queries;
  if (!f.query_store.empty()) queries = load_store(fs::path(f.query_store));
  const auto split = parse_split_selector(f.split);
  const DistanceKind kind = make_distance(f.distance, m, store, split);

  AttributeOptions opts;
  opts.split = split;
  opts.query_store = queries ? &*queries : nullptr;
  opts.jobs = jobs;
  const DatasetAttribution res = attribute_dataset(m, store, kind, opts);
  for (const auto& e : res.errors) std::cerr << "attribution error: " << e.image << ": " << e.message << '\n';

  if (!f.out.empty()) {
    OutputGuard guard;
    std::ofstream out(guard.file(f.out), std::ios::binary);
    if (!out) throw Error("cannot write '" + f.out + "'");
    write_results(res.results, out);
    out.close();
    guard.commit();
  }
  if (res.results.empty()) throw LookupError("no original could be attributed");
  char buf[96];
  std::snprintf(buf, sizeof buf, "accuracy %.4f coverage %.4f (%zu/%zu)\n", res.accuracy(), res.coverage(),
                res.results.size(), res.targets);
  std::cout << buf;
  return kOk;
}

// ---------------------------------------------------------------------------
// task

struct TaskFlags {
  std::string kind, manifest, store, perturbed, out, config;
  std::vector<std::string> methods{"resynthesis", "mlp", "centroid"};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::vector<std::size_t> shots{1, 2, 3, 5, 7, 10, 15, 20};
  std::vector<std::size_t> classes{5, 8, 10, 12, 14};
  DistanceFlags distance;
};

std::map<std::string, fs::path> perturbed_files(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  for (Operator op : kOperators) {
    const fs::path p = dir / (std::string(to_string(op)) + ".rfs");
    if (fs::exists(p)) out.emplace(to_string(op), p);
  }
  return out;
}

json run_config_json(const TaskFlags& f) {
  json j;
  j["tool"] = "resynth";
  j["version"] = RESYNTH_VERSION;
  j["task"] = f.kind;
  j["manifest"] = fs::absolute(f.manifest).lexically_normal().string();
  j["store"] = fs::absolute(f.store).lexically_normal().string();
  j["perturbed"] = f.perturbed.empty() ? json(nullptr) : json(fs::absolute(f.perturbed).lexically_normal().string());
  j["methods"] = f.methods;
  j["seeds"] = f.seeds;
  if (f.kind == "few-shot") {
    j["shots"] = f.shots;
    j["classes"] = f.classes;
  }
  j["distance"] = f.distance.kind;
  j["shrinkage"] = f.distance.shrinkage;
  j["precision"] = f.distance.precision;
  json digests;
  digests["manifest"] = file_digest(f.manifest);
  digests["store"] = file_digest(f.store);
  if (!f.perturbed.empty()) {
    json per = json::object();
    for (const auto& [op, p] : perturbed_files(f.perturbed)) per[op] = file_digest(p);
    const fs::path draws = fs::path(f.perturbed) / "draws.jsonl";
    if (fs::exists(draws)) per["draws.jsonl"] = file_digest(draws);
    digests["perturbed"] = std::move(per);
  }
  j["input_digests"] = std::move(digests);
  return j;
}

TaskFlags flags_from_run_config(const fs::path& path, const std::string& out) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open run config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("run config is not valid JSON: ") + e.what(), e.byte);
  }
  TaskFlags f;
  try {
    f.kind = j.at("task").get<std::string>();
    f.manifest = j.at("manifest").get<std::string>();
    f.store = j.at("store").get<std::string>();
    if (!j.at("perturbed").is_null()) f.perturbed = j.at("perturbed").get<std::string>();
    f.methods = j.at("methods").get<std::vector<std::string>>();
    f.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("shots")) f.shots = j.at("shots").get<std::vector<std::size_t>>();
    if (j.contains("classes")) f.classes = j.at("classes").get<std::vector<std::size_t>>();
    f.distance.kind = j.at("distance").get<std::string>();
    f.distance.shrinkage = j.at("shrinkage").get<double>();
    f.distance.precision = j.at("precision").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
  f.out = out;
  const json now = run_config_json(f);
  if (nlohmann::json(now.at("input_digests")) != j.at("input_digests"))
    throw ConfigError("inputs changed since the run config was written");
  return f;
}

int cmd_task(TaskFlags f, std::size_t jobs) {
  if (!f.config.empty()) {
    const std::string out = f.out;
    const std::string kind = f.kind;
    f = flags_from_run_config(f.config, out);
    if (!kind.empty() && kind != f.kind) throw ConfigError("task kind differs from the run config");
  }
  if (f.kind.empty()) throw ConfigError("task kind required (few-shot, plain or robust)");
  if (f.manifest.empty() || f.store.empty()) throw ConfigError("--manifest and --store are required");
  if (f.kind == "robust" && f.perturbed.empty()) throw ConfigError("robust task needs --perturbed");

  const Manifest m = load_manifest(fs::path(f.manifest));
  const FeatureStore store = load_store(fs::path(f.store));
  const ValidationReport vr = validate_manifest(m);
  if (!vr.valid()) {
    for (const auto& v : vr.violations) std::cerr << "violation: " << v.message() << '\n';
    throw ManifestError("manifest is invalid");
  }
  const json run_config = run_config_json(f);

  TaskOptions base;
  base.methods.clear();
  for (const auto& name : f.methods) base.methods.push_back(parse_method(name));
  base.seeds = f.seeds;
  base.jobs = jobs;
  base.distance = make_distance(f.distance, m, store, f.kind == "few-shot" ? std::nullopt : std::optional(Split::test));

  ExperimentReport report;
  std::map<std::string, FeatureStore> perturbed;
  if (f.kind == "few-shot") {
    FewShotOptions o;
    static_cast<TaskOptions&>(o) = base;
    o.mlp = MlpConfig::few_shot();
    o.shots = f.shots;
    o.classes = f.classes;
    report = run_few_shot(m, store, o);
  } else if (f.kind == "plain") {
    report = run_plain(m, store, base);
  } else if (f.kind == "robust") {
    std::map<std::string, const FeatureStore*> ptrs;
    for (const auto& [op, p] : perturbed_files(f.perturbed)) perturbed.emplace(op, load_store(p));
    for (const auto& [op, s] : perturbed) ptrs.emplace(op, &s);
    report = run_robust(m, store, ptrs, base);
    const fs::path draws = fs::path(f.perturbed) / "draws.jsonl";
    report.metadata["operator_draws"] = fs::exists(draws) ? json("draws.jsonl") : json(nullptr);
  } else {
    throw ConfigError("unknown task '" + f.kind + "'");
  }
  report.metadata["tool_version"] = RESYNTH_VERSION;
  report.metadata["input_digests"] = run_config.at("input_digests");

  OutputGuard guard;
  const fs::path out(f.out);
  guard.directory(out);
  write_text(guard.file(out / "run_config.json"), run_config.dump(2) + "\n");
  save_report(report, guard.file(out / "report.csv"), guard.file(out / "report.json"));
  guard.commit();
  std::ifstream csv(out / "report.csv");
  std::cout << csv.rdbuf();
  return kOk;
}

int cmd_report(const std::string& path, const std::string& format) {
  const ExperimentReport r = load_report(fs::path(path));
  if (format == "json")
    std::cout << to_json(r).dump(2) << '\n';
  else
    write_csv(r, std::cout);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-free synthetic image source attribution by resynthesis"};
  app.set_version_flag("--version", RESYNTH_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t jobs = 0;
  app.add_option("--jobs,-j", jobs, "worker threads (0 = all cores)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check a manifest's structural invariants");
  validate->add_option("manifest", validate_path)->required();

  EmbedFlags ef;
  auto* embed = app.add_subcommand("embed", "embed every image of a manifest into a feature store");
  embed->add_option("--manifest", ef.manifest)->required();
  embed->add_option("--out", ef.out)->required();
  embed->add_option("--backend", ef.backend)->check(CLI::IsMember({"hash", "http"}));
  embed->add_option("--dim", ef.dim);
  embed->add_option("--seed", ef.seed);
  embed->add_option("--content-root", ef.content_root);
  embed->add_option("--endpoints", ef.endpoints, "service endpoint config (http backend)");
  embed->add_option("--cassette", ef.cassette);
  embed->add_option("--cassette-mode", ef.cassette_mode)->check(CLI::IsMember({"record", "replay", "passthrough"}));

  SimulateFlags sf;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic manifest and feature store");
  simulate->add_option("--out", sf.out)->required();
  simulate->add_option("--config", sf.config);
  simulate->add_option("--characters", sf.characters);
  simulate->add_option("--dim", sf.dim);
  simulate->add_option("--sources", sf.sources)->check(CLI::IsMember({"core", "extended"}));
  simulate->add_option("--alpha", sf.alpha, "fingerprint strength");
  simulate->add_option("--beta", sf.beta, "caption drift");
  simulate->add_option("--sigma", sf.sigma, "per-image noise");
  simulate->add_option("--spread", sf.spread, "semantic spread");
  simulate->add_option("--seed", sf.seed);
  simulate->add_flag("--perturbed", sf.perturbed, "also write per-operator query stores");

  PerturbFlags pf;
  auto* perturb = app.add_subcommand("perturb", "write post-processed copies of the originals");
  perturb->add_option("--manifest", pf.manifest)->required();
  perturb->add_option("--content-root", pf.content_root);
  perturb->add_option("--out", pf.out)->required();
  perturb->add_option("--ops", pf.ops, "comma-separated operators or 'all'");
  perturb->add_option("--seed", pf.seed);
  perturb->add_option("--split", pf.split)->check(CLI::IsMember({"train", "val", "test", "all"}));

  AttributeFlags af;
  auto* attribute = app.add_subcommand("attribute", "attribute originals to their nearest resynthesis");
  attribute->add_option("--manifest", af.manifest)->required();
  attribute->add_option("--store", af.store)->required();
  attribute->add_option("--query-store", af.query_store);
  attribute->add_option("--out", af.out, "per-image results (NDJSON)");
  attribute->add_option("--split", af.split)->check(CLI::IsMember({"train", "val", "test", "all"}));
  add_distance_flags(attribute, af.distance);

  TaskFlags tf;
  auto* task = app.add_subcommand("task", "run an evaluation task and write a report");
  task->add_option("kind", tf.kind)->check(CLI::IsMember({"few-shot", "plain", "robust"}));
  task->add_option("--manifest", tf.manifest);
  task->add_option("--store", tf.store);
  task->add_option("--perturbed", tf.perturbed, "directory of <operator>.rfs query stores");
  task->add_option("--out", tf.out)->required();
  task->add_option("--config", tf.config, "rerun from a run_config.json");
  task->add_option("--methods", tf.methods)->delimiter(',');
  task->add_option("--seeds", tf.seeds)->delimiter(',');
  task->add_option("--shots", tf.shots)->delimiter(',');
  task->add_option("--classes", tf.classes)->delimiter(',');
  add_distance_flags(task, tf.distance);

  std::string report_path, report_format = "csv";
  auto* report = app.add_subcommand("report", "print a saved report");
  report->add_option("report", report_path)->required();
  report->add_option("--format", report_format)->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kFault;
  }

  try {
    if (*validate) return cmd_validate(validate_path);
    if (*embed) return cmd_embed(ef, jobs);
    if (*simulate) return cmd_simulate(sf, jobs);
    if (*perturb) return cmd_perturb(pf, jobs);
    if (*attribute) return cmd_attribute(af, jobs);
    if (*task) return cmd_task(tf, jobs);
    if (*report) return cmd_report(report_path, report_format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kOk;
}
