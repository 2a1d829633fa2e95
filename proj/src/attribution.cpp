#include "resynth/attribution.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include <json.hpp>

#include "resynth/parallel.hpp"

namespace resynth {

AttributionResult attribute(std::span<const float> original, std::span<const PanelEntry> panel,
                            const DistanceKind& kind) {
  if (panel.empty()) throw LookupError("cannot attribute against an empty panel");

  std::vector<const PanelEntry*> ordered;
  ordered.reserve(panel.size());
  for (const auto& e : panel) ordered.push_back(&e);
  std::sort(ordered.begin(), ordered.end(),
            [](const PanelEntry* a, const PanelEntry* b) { return a->source < b->source; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->source == ordered[i - 1]->source)
      throw LookupError("panel lists source '" + std::string(ordered[i]->source) + "' twice");
  }

  AttributionResult result;
  result.distance_kind = kind.name();
  double best = 0.0;
  const PanelEntry* winner = nullptr;
  for (const PanelEntry* e : ordered) {
    const double d = distance(kind, original, e->features);
    result.distances.emplace(std::string(e->source), d);
    if (!winner || d < best) {
      best = d;
      winner = e;
    }
  }
  result.predicted = std::string(winner->source);
  return result;
}

AttributionResult attribute(const FeatureVector& original,
                            const std::map<std::string, FeatureVector>& panel,
                            const DistanceKind& kind) {
  std::vector<PanelEntry> entries;
  entries.reserve(panel.size());
  for (const auto& [source, vec] : panel) entries.push_back({source, vec.values()});
  return attribute(original.values(), entries, kind);
}

double DatasetAttribution::accuracy() const {
  if (results.empty()) throw LookupError("accuracy of an empty result set");
  std::size_t hits = 0;
  for (const auto& r : results)
    if (r.truth && r.predicted == *r.truth) ++hits;
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

DatasetAttribution attribute_dataset(const Manifest& manifest, const FeatureStore& store,
                                     const DistanceKind& kind, const AttributeOptions& options) {
  std::vector<std::string> eligible = manifest.panel_sources();
  if (!options.sources.empty()) {
    std::set<std::string> wanted(options.sources.begin(), options.sources.end());
    std::erase_if(eligible, [&](const std::string& s) { return !wanted.contains(s); });
  }
  const std::set<std::string> eligible_set(eligible.begin(), eligible.end());

  std::vector<const ImageRecord*> targets;
  for (const ImageRecord* img : manifest.originals(options.split))
    if (eligible_set.contains(img->source)) targets.push_back(img);

  const FeatureStore& queries = options.query_store ? *options.query_store : store;

  struct Slot {
    std::optional<AttributionResult> result;
    std::string error;
  };
  std::vector<Slot> slots(targets.size());

  parallel_for(targets.size(), options.jobs, [&](std::size_t i) {
    const ImageRecord& orig = *targets[i];
    const FeatureVector* q = queries.find(orig.id);
    if (!q) {
      slots[i].error = "missing features for original";
      return;
    }
    std::map<std::string, std::string> children;
    for (const ImageRecord* child : manifest.children_of(orig.id)) children.emplace(child->source, child->id);

    std::vector<PanelEntry> panel;
    std::vector<std::string> missing;
    for (const auto& source : eligible) {
      auto it = children.find(source);
      const FeatureVector* v = it == children.end() ? nullptr : store.find(it->second);
      if (!v) {
        missing.push_back(source);
        continue;
      }
      panel.push_back({source, v->values()});
    }
    if (panel.empty()) {
      slots[i].error = "no resynthesis features available";
      return;
    }
    AttributionResult r = attribute(q->values(), panel, kind);
    r.image = orig.id;
    r.truth = orig.source;
    r.missing_sources = std::move(missing);
    slots[i].result = std::move(r);
  });

  DatasetAttribution out;
  out.targets = targets.size();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].result)
      out.results.push_back(std::move(*slots[i].result));
    else
      out.errors.push_back({targets[i]->id, slots[i].error});
  }
  return out;
}

std::vector<FeatureVector> resynthesis_pool(const Manifest& manifest, const FeatureStore& store,
                                            std::optional<Split> split) {
  std::vector<FeatureVector> pool;
  for (const auto& img : manifest.images()) {
    if (img.kind != ImageKind::resynthesis) continue;
    if (split && manifest.split_of(img.character) != split) continue;
    if (const FeatureVector* v = store.find(img.id)) pool.push_back(*v);
  }
  return pool;
}

void write_results(std::span<const AttributionResult> results, std::ostream& out) {
  for (const auto& r : results) {
    nlohmann::ordered_json j;
    j["image"] = r.image;
    j["predicted"] = r.predicted;
    j["truth"] = r.truth ? nlohmann::ordered_json(*r.truth) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json d = nlohmann::ordered_json::object();
    for (const auto& [s, v] : r.distances) d[s] = v;
    j["distances"] = std::move(d);
    j["distance_kind"] = r.distance_kind;
    if (!r.missing_sources.empty()) j["missing_sources"] = r.missing_sources;
    out << j.dump() << '\n';
  }
}

}  // namespace resynth
