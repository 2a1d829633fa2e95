#include "resynth/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "resynth/hash.hpp"
#include "resynth/parallel.hpp"

namespace resynth {

std::map<std::string, double> default_operator_noise() {
  return {
      {"blur", 0.10},     {"brightness", 0.15}, {"contrast", 0.15}, {"crop", 0.20},
      {"greyscale", 0.10}, {"jpeg", 0.05},      {"resize", 0.05},   {"rotation", 0.15},
      {"social", 0.10},   {"webp", 0.05},
  };
}

void SimulatorConfig::validate() const {
  if (dim == 0) throw ConfigError("simulator dim must be positive");
  if (characters == 0) throw ConfigError("simulator needs at least one character");
  for (double v : {semantic_spread, caption_drift, noise, fingerprint_strength})
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("simulator scales must be finite and non-negative");
  std::set<std::string> names;
  for (const auto& s : sources) {
    if (!names.insert(s.source.name).second)
      throw ConfigError("simulator lists source '" + s.source.name + "' twice");
    if (s.strength && (!(*s.strength >= 0.0) || !std::isfinite(*s.strength)))
      throw ConfigError("fingerprint strength of '" + s.source.name + "' must be non-negative");
  }
  const std::size_t n = sources.empty() ? core_sources().size() : sources.size();
  if (orthogonalize && dim < n)
    throw ConfigError("dim " + std::to_string(dim) + " cannot hold " + std::to_string(n) +
                      " orthogonal fingerprints");
  if (split && split->train + split->val + split->test != characters)
    throw SplitArityError("split sizes do not add up to the character count");
  for (const auto& [op, scale] : operator_noise)
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw ConfigError("operator noise for '" + op + "' must be non-negative");
}

nlohmann::ordered_json SimulatorConfig::to_json() const {
  nlohmann::ordered_json j;
  j["dim"] = dim;
  j["characters"] = characters;
  j["semantic_spread"] = semantic_spread;
  j["caption_drift"] = caption_drift;
  j["noise"] = noise;
  j["fingerprint_strength"] = fingerprint_strength;
  j["orthogonalize"] = orthogonalize;
  j["seed"] = seed;
  auto src = nlohmann::ordered_json::array();
  for (const auto& s : sources) {
    nlohmann::ordered_json e;
    e["name"] = s.source.name;
    e["commercial"] = s.source.commercial;
    e["extension_only"] = s.source.extension_only;
    if (s.strength) e["strength"] = *s.strength;
    src.push_back(std::move(e));
  }
  j["sources"] = std::move(src);
  if (split) j["split"] = {split->train, split->val, split->test};
  j["split_seed"] = split_seed;
  nlohmann::ordered_json ops = nlohmann::ordered_json::object();
  for (const auto& [op, scale] : operator_noise) ops[op] = scale;
  j["operator_noise"] = std::move(ops);
  return j;
}

SimulatorConfig SimulatorConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("simulator config must be a JSON object");
  static const std::set<std::string> known = {
      "dim",   "characters", "semantic_spread", "caption_drift", "noise", "fingerprint_strength",
      "orthogonalize", "seed", "sources", "split", "split_seed", "operator_noise"};
  for (const auto& [key, v] : j.items())
    if (!known.contains(key)) throw ConfigError("unknown simulator config key '" + key + "'");

  SimulatorConfig c;
  try {
    c.dim = j.value("dim", c.dim);
    c.characters = j.value("characters", c.characters);
    c.semantic_spread = j.value("semantic_spread", c.semantic_spread);
    c.caption_drift = j.value("caption_drift", c.caption_drift);
    c.noise = j.value("noise", c.noise);
    c.fingerprint_strength = j.value("fingerprint_strength", c.fingerprint_strength);
    c.orthogonalize = j.value("orthogonalize", c.orthogonalize);
    c.seed = j.value("seed", c.seed);
    c.split_seed = j.value("split_seed", c.split_seed);
    if (j.contains("sources")) {
      const auto& s = j.at("sources");
      if (s.is_string()) {
        const std::string preset = s.get<std::string>();
        std::vector<SourceId> ids;
        if (preset == "core") ids = core_sources();
        else if (preset == "extended" || preset == "all") ids = all_sources();
        else throw ConfigError("unknown source preset '" + preset + "'");
        for (auto& id : ids) c.sources.push_back({std::move(id), std::nullopt});
      } else {
        for (const auto& e : s) {
          SyntheticSourceSpec spec;
          if (e.is_string()) {
            spec.source.name = e.get<std::string>();
          } else {
            spec.source.name = e.at("name").get<std::string>();
            spec.source.commercial = e.value("commercial", false);
            spec.source.extension_only = e.value("extension_only", false);
            if (e.contains("strength")) spec.strength = e.at("strength").get<double>();
          }
          c.sources.push_back(std::move(spec));
        }
      }
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      if (!s.is_array() || s.size() != 3) throw ConfigError("split must be [train, val, test]");
      c.split = SplitSizes{s[0].get<std::size_t>(), s[1].get<std::size_t>(), s[2].get<std::size_t>()};
    }
    if (j.contains("operator_noise"))
      for (const auto& [op, v] : j.at("operator_noise").items()) c.operator_noise[op] = v.get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad simulator config: ") + e.what());
  }
  c.validate();
  return c;
}

SimulatorConfig load_simulator_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open simulator config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("simulator config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return SimulatorConfig::from_json(j);
}

namespace {

std::vector<double> normals(std::uint64_t key, std::size_t dim) {
  CounterRng rng(key);
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

Simulator::Simulator(SimulatorConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.sources.empty())
    for (auto& s : core_sources()) config_.sources.push_back({std::move(s), std::nullopt});
  std::sort(config_.sources.begin(), config_.sources.end(),
            [](const SyntheticSourceSpec& a, const SyntheticSourceSpec& b) { return a.source.name < b.source.name; });

  for (const auto& spec : config_.sources) {
    SyntheticSource s{spec.source, normals(hash_key("fingerprint", config_.seed, spec.source.name), config_.dim),
                      spec.strength.value_or(config_.fingerprint_strength)};
    if (config_.orthogonalize) {
      // Two passes of classical Gram-Schmidt keep the basis orthogonal to
      // working precision.
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& prev : sources_) {
          const double p = dot(s.fingerprint, prev.fingerprint);
          for (std::size_t i = 0; i < config_.dim; ++i) s.fingerprint[i] -= p * prev.fingerprint[i];
        }
      }
    }
    const double norm = std::sqrt(dot(s.fingerprint, s.fingerprint));
    if (!(norm > 1e-12)) throw ConfigError("degenerate fingerprint for '" + spec.source.name + "'");
    for (auto& x : s.fingerprint) x /= norm;
    sources_.push_back(std::move(s));
  }
}

const SyntheticSource& Simulator::source(std::string_view name) const {
  auto it = std::lower_bound(sources_.begin(), sources_.end(), name,
                             [](const SyntheticSource& s, std::string_view n) { return s.source.name < n; });
  if (it == sources_.end() || it->source.name != name)
    throw LookupError("simulator has no source '" + std::string(name) + "'");
  return *it;
}

std::vector<double> Simulator::base(CharacterId character) const {
  auto v = normals(hash_key("base", config_.seed, character), config_.dim);
  for (auto& x : v) x *= config_.semantic_spread;
  return v;
}

std::vector<double> Simulator::drift(CharacterId character, std::string_view described_source) const {
  return normals(hash_key("drift", config_.seed, character, described_source), config_.dim);
}

FeatureVector Simulator::feature(CharacterId character, std::string_view source_name,
                                 const SynthRole& role) const {
  const SyntheticSource& s = source(source_name);
  std::vector<double> v = base(character);
  for (std::size_t i = 0; i < config_.dim; ++i) v[i] += s.strength * s.fingerprint[i];
  if (role.kind == ImageKind::resynthesis) {
    source(role.described_source);
    if (config_.caption_drift != 0.0) {
      const auto d = drift(character, role.described_source);
      for (std::size_t i = 0; i < config_.dim; ++i) v[i] += config_.caption_drift * d[i];
    }
  }
  if (config_.noise != 0.0) {
    const auto eps = normals(hash_key("noise", config_.seed, character, source_name,
                                      static_cast<int>(role.kind), role.described_source),
                             config_.dim);
    for (std::size_t i = 0; i < config_.dim; ++i) v[i] += config_.noise * eps[i];
  }
  std::vector<float> out(config_.dim);
  for (std::size_t i = 0; i < config_.dim; ++i) out[i] = static_cast<float>(v[i]);
  return FeatureVector(std::move(out));
}

SyntheticDataset generate_synthetic_dataset(const SimulatorConfig& config, std::size_t jobs) {
  Simulator sim(config);
  std::vector<SourceId> ids;
  for (const auto& s : sim.sources()) ids.push_back(s.source);
  std::vector<CharacterId> chars(config.characters);
  std::iota(chars.begin(), chars.end(), 0);
  Manifest layout = build_layout(ids, chars);

  SplitSizes sizes;
  if (config.split) {
    sizes = *config.split;
  } else {
    const std::size_t tenth = config.characters >= 10 ? config.characters / 10 : 0;
    sizes = {config.characters - 2 * tenth, tenth, tenth};
  }
  Manifest manifest = build_split(layout, sizes.train, sizes.val, sizes.test, config.split_seed);

  const auto& images = manifest.images();
  std::vector<FeatureVector> vecs(images.size());
  parallel_for(images.size(), jobs, [&](std::size_t i) {
    const ImageRecord& img = images[i];
    SynthRole role;
    if (img.kind == ImageKind::resynthesis) {
      const ImageRecord* parent = manifest.find_image(*img.parent_original);
      role = SynthRole::resynthesis_of(parent->source);
    }
    vecs[i] = sim.feature(img.character, img.source, role);
  });

  FeatureStore store(config.dim);
  for (std::size_t i = 0; i < images.size(); ++i) store.insert(images[i].id, std::move(vecs[i]));
  return {std::move(manifest), std::move(store)};
}

FeatureStore perturbed_store(const Simulator& sim, const Manifest& manifest, const FeatureStore& clean,
                             std::string_view op, double scale) {
  if (!(scale >= 0.0) || !std::isfinite(scale)) throw ConfigError("perturbation scale must be non-negative");
  FeatureStore out(clean.dim());
  for (const ImageRecord* img : manifest.originals()) {
    const FeatureVector* v = clean.find(img->id);
    if (!v) continue;
    if (scale == 0.0) {
      out.insert(img->id, *v);
      continue;
    }
    CounterRng rng(hash_key("perturb", sim.config().seed, op, img->id));
    std::vector<float> values(v->values().begin(), v->values().end());
    for (auto& x : values) x = static_cast<float>(static_cast<double>(x) + scale * rng.normal());
    out.insert(img->id, FeatureVector(std::move(values)));
  }
  return out;
}

}  // namespace resynth
