#include "resynth/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "resynth/hash.hpp"

namespace resynth {

std::string_view to_string(PromptKind kind) noexcept {
  return kind == PromptKind::primary ? "primary" : "secondary";
}

std::string_view to_string(ImageKind kind) noexcept {
  return kind == ImageKind::original ? "original" : "resynthesis";
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "test";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(text) + "'");
}

std::string_view to_string(ViolationKind kind) noexcept {
  switch (kind) {
    case ViolationKind::completeness: return "completeness";
    case ViolationKind::linkage: return "linkage";
    case ViolationKind::split_purity: return "split_purity";
    case ViolationKind::prompt_length: return "prompt_length";
    case ViolationKind::reference: return "reference";
  }
  return "reference";
}

std::size_t utf8_length(std::string_view text) noexcept {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Manifest

Manifest::Manifest(std::vector<SourceId> sources, std::vector<PromptRecord> prompts,
                   std::vector<ImageRecord> images, SplitMap split)
    : sources_(std::move(sources)),
      prompts_(std::move(prompts)),
      images_(std::move(images)),
      split_(std::move(split)) {
  std::sort(sources_.begin(), sources_.end(),
            [](const SourceId& a, const SourceId& b) { return a.name < b.name; });
  for (std::size_t i = 0; i < sources_.size(); ++i) {
    if (!source_index_.emplace(sources_[i].name, i).second)
      throw ManifestError("duplicate source name '" + sources_[i].name + "'");
  }
  for (std::size_t i = 0; i < prompts_.size(); ++i) {
    if (!prompt_index_.emplace(prompts_[i].id, i).second)
      throw ManifestError("duplicate prompt id '" + prompts_[i].id + "'");
  }
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (!image_index_.emplace(images_[i].id, i).second)
      throw ManifestError("duplicate image id '" + images_[i].id + "'");
    if (images_[i].parent_original) children_[*images_[i].parent_original].push_back(i);
  }
}

const SourceId* Manifest::find_source(std::string_view name) const {
  auto it = source_index_.find(name);
  return it == source_index_.end() ? nullptr : &sources_[it->second];
}

const ImageRecord* Manifest::find_image(std::string_view id) const {
  auto it = image_index_.find(id);
  return it == image_index_.end() ? nullptr : &images_[it->second];
}

const PromptRecord* Manifest::find_prompt(std::string_view id) const {
  auto it = prompt_index_.find(id);
  return it == prompt_index_.end() ? nullptr : &prompts_[it->second];
}

std::optional<Split> Manifest::split_of(CharacterId character) const {
  auto it = split_.find(character);
  if (it == split_.end()) return std::nullopt;
  return it->second;
}

std::vector<CharacterId> Manifest::characters() const {
  std::set<CharacterId> seen;
  for (const auto& img : images_) seen.insert(img.character);
  for (const auto& p : prompts_) seen.insert(p.character);
  return {seen.begin(), seen.end()};
}

std::size_t Manifest::count(ImageKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      images_.begin(), images_.end(), [&](const ImageRecord& r) { return r.kind == kind; }));
}

std::size_t Manifest::count(ImageKind kind, Split split) const {
  return static_cast<std::size_t>(
      std::count_if(images_.begin(), images_.end(), [&](const ImageRecord& r) {
        return r.kind == kind && split_of(r.character) == split;
      }));
}

std::vector<const ImageRecord*> Manifest::originals(std::optional<Split> split) const {
  std::vector<const ImageRecord*> out;
  for (const auto& img : images_) {
    if (img.kind != ImageKind::original) continue;
    if (split && split_of(img.character) != split) continue;
    out.push_back(&img);
  }
  std::sort(out.begin(), out.end(), [](const ImageRecord* a, const ImageRecord* b) {
    return std::tie(a->character, a->source, a->id) < std::tie(b->character, b->source, b->id);
  });
  return out;
}

std::vector<const ImageRecord*> Manifest::children_of(std::string_view original_id) const {
  std::vector<const ImageRecord*> out;
  auto it = children_.find(original_id);
  if (it == children_.end()) return out;
  out.reserve(it->second.size());
  for (std::size_t i : it->second) out.push_back(&images_[i]);
  return out;
}

bool Manifest::is_extended() const {
  for (const auto& img : images_) {
    const SourceId* s = find_source(img.source);
    if (s && s->extension_only) return true;
  }
  return false;
}

std::vector<std::string> Manifest::panel_sources() const {
  const bool extended = is_extended();
  std::vector<std::string> out;
  for (const auto& s : sources_) {
    if (extended || !s.extension_only) out.push_back(s.name);
  }
  return out;
}

Manifest Manifest::with_split(SplitMap split) const {
  return Manifest(sources_, prompts_, images_, std::move(split));
}

bool operator==(const Manifest& a, const Manifest& b) {
  return a.sources_ == b.sources_ && a.prompts_ == b.prompts_ && a.images_ == b.images_ &&
         a.split_ == b.split_;
}

// ---------------------------------------------------------------------------
// Operations

Manifest build_split(const Manifest& manifest, std::size_t train, std::size_t val,
                     std::size_t test, std::uint64_t seed) {
  std::vector<CharacterId> chars = manifest.characters();
  if (train + val + test != chars.size()) {
    throw SplitArityError("split sizes " + std::to_string(train) + "+" + std::to_string(val) +
                          "+" + std::to_string(test) + " do not sum to " +
                          std::to_string(chars.size()) + " characters");
  }
  CounterRng rng(hash_key("build_split", seed));
  seeded_shuffle(chars.begin(), chars.end(), rng);

  SplitMap split;
  for (std::size_t i = 0; i < chars.size(); ++i) {
    const Split s = i < train ? Split::train : (i < train + val ? Split::val : Split::test);
    split.emplace(chars[i], s);
  }
  return manifest.with_split(std::move(split));
}

std::string Violation::message() const {
  return std::string(to_string(kind)) + ": " + subject + ": " + detail;
}

std::size_t ValidationReport::count(ViolationKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      violations.begin(), violations.end(), [&](const Violation& v) { return v.kind == kind; }));
}

ValidationReport validate_manifest(const Manifest& manifest) {
  ValidationReport report;
  auto flag = [&](ViolationKind kind, std::string subject, std::string detail) {
    report.violations.push_back({kind, std::move(subject), std::move(detail)});
  };

  report.prompts = manifest.prompts().size();
  report.characters = manifest.characters().size();

  for (const auto& p : manifest.prompts()) {
    if (utf8_length(p.text) > kMaxPromptChars) {
      flag(ViolationKind::prompt_length, p.id,
           "prompt has " + std::to_string(utf8_length(p.text)) + " characters (max " +
               std::to_string(kMaxPromptChars) + ")");
    }
    if (p.kind == PromptKind::secondary) {
      if (!p.described_image) {
        flag(ViolationKind::linkage, p.id, "secondary prompt has no described_image");
      } else if (!manifest.find_image(*p.described_image)) {
        flag(ViolationKind::reference, p.id,
             "described_image '" + *p.described_image + "' not found");
      }
    } else if (p.described_image) {
      flag(ViolationKind::linkage, p.id, "primary prompt carries a described_image");
    }
  }

  for (const auto& img : manifest.images()) {
    const auto split = manifest.split_of(img.character);
    if (img.kind == ImageKind::original) {
      ++report.originals;
      if (split) ++report.per_split[*split].originals;
    } else {
      ++report.resyntheses;
      if (split) ++report.per_split[*split].resyntheses;
    }

    if (!manifest.find_source(img.source))
      flag(ViolationKind::reference, img.id, "unknown source '" + img.source + "'");

    const PromptRecord* prompt = manifest.find_prompt(img.prompt);
    if (!prompt) flag(ViolationKind::reference, img.id, "unknown prompt '" + img.prompt + "'");

    if (img.kind == ImageKind::original) {
      if (img.parent_original)
        flag(ViolationKind::linkage, img.id, "original carries a parent_original");
      if (prompt && (prompt->kind != PromptKind::primary || prompt->character != img.character))
        flag(ViolationKind::linkage, img.id,
             "original must use a primary prompt of its own character");
      continue;
    }

    if (!img.parent_original) {
      flag(ViolationKind::linkage, img.id, "resynthesis has no parent_original");
      continue;
    }
    const ImageRecord* parent = manifest.find_image(*img.parent_original);
    if (!parent) {
      flag(ViolationKind::linkage, img.id,
           "orphaned resynthesis: parent '" + *img.parent_original + "' not found");
      continue;
    }
    if (parent->kind != ImageKind::original)
      flag(ViolationKind::linkage, img.id, "parent '" + parent->id + "' is not an original");
    if (parent->character != img.character)
      flag(ViolationKind::linkage, img.id,
           "character " + std::to_string(img.character) + " differs from parent's " +
               std::to_string(parent->character));
    if (prompt && (prompt->kind != PromptKind::secondary ||
                   prompt->described_image != std::optional<std::string>(parent->id)))
      flag(ViolationKind::linkage, img.id,
           "resynthesis prompt must be the secondary description of its parent");
  }

  // Panel completeness.
  const std::vector<std::string> panel = manifest.panel_sources();
  for (const ImageRecord* orig : manifest.originals()) {
    std::map<std::string, std::size_t> per_source;
    for (const ImageRecord* child : manifest.children_of(orig->id)) ++per_source[child->source];
    for (const auto& s : panel) {
      const auto it = per_source.find(s);
      const std::size_t n = it == per_source.end() ? 0 : it->second;
      if (n == 0)
        flag(ViolationKind::completeness, orig->id, "missing resynthesis from source '" + s + "'");
      else if (n > 1)
        flag(ViolationKind::completeness, orig->id,
             std::to_string(n) + " resyntheses from source '" + s + "'");
    }
  }

  // Split purity: with a split in place, every character is assigned.
  if (!manifest.split().empty()) {
    for (CharacterId c : manifest.characters()) {
      if (!manifest.split_of(c))
        flag(ViolationKind::split_purity, "character " + std::to_string(c),
             "character has no split assignment");
    }
  }

  return report;
}

Manifest merge_extension(const Manifest& test_manifest, std::vector<ImageRecord> extension_images,
                         std::vector<SourceId> new_sources,
                         std::vector<PromptRecord> extension_prompts) {
  auto check_character = [&](CharacterId c, const std::string& id) {
    const auto split = test_manifest.split_of(c);
    if (split != Split::test) {
      throw LeakageError("extension record '" + id + "' references character " +
                         std::to_string(c) + " which is " +
                         (split ? "in the " + std::string(to_string(*split)) + " split"
                                : "not in the test split"));
    }
  };
  for (const auto& img : extension_images) check_character(img.character, img.id);
  for (const auto& p : extension_prompts) check_character(p.character, p.id);

  std::vector<SourceId> sources = test_manifest.sources();
  sources.insert(sources.end(), new_sources.begin(), new_sources.end());
  std::vector<PromptRecord> prompts = test_manifest.prompts();
  prompts.insert(prompts.end(), std::make_move_iterator(extension_prompts.begin()),
                 std::make_move_iterator(extension_prompts.end()));
  std::vector<ImageRecord> images = test_manifest.images();
  images.insert(images.end(), std::make_move_iterator(extension_images.begin()),
                std::make_move_iterator(extension_images.end()));
  return Manifest(std::move(sources), std::move(prompts), std::move(images),
                  test_manifest.split());
}

std::map<std::string, std::string> resyntheses_of(const Manifest& manifest,
                                                  std::string_view original_id) {
  const ImageRecord* img = manifest.find_image(original_id);
  if (!img) throw LookupError("unknown image id '" + std::string(original_id) + "'");
  if (img->kind != ImageKind::original)
    throw LookupError("image '" + img->id + "' is a resynthesis, not an original");

  std::map<std::string, std::string> panel;
  for (const ImageRecord* child : manifest.children_of(img->id)) {
    if (!panel.emplace(child->source, child->id).second)
      throw LookupError("original '" + img->id + "' has several resyntheses from '" +
                        child->source + "'");
  }
  return panel;
}

Manifest restrict_to_split(const Manifest& manifest, Split split) {
  auto keep = [&](CharacterId c) { return manifest.split_of(c) == split; };
  std::vector<PromptRecord> prompts;
  for (const auto& p : manifest.prompts())
    if (keep(p.character)) prompts.push_back(p);
  std::vector<ImageRecord> images;
  for (const auto& img : manifest.images())
    if (keep(img.character)) images.push_back(img);
  SplitMap map;
  for (const auto& [c, s] : manifest.split())
    if (s == split) map.emplace(c, s);
  return Manifest(manifest.sources(), std::move(prompts), std::move(images), std::move(map));
}

// ---------------------------------------------------------------------------
// Canonical layouts

std::vector<SourceId> core_sources() {
  return {
      {"Bing", true, false},        {"Firefly", true, false},
      {"Flux.1.dev", false, false}, {"Freepik", false, false},
      {"Imagen3", true, false},     {"Leonardo AI", true, false},
      {"Midjourney", true, false},  {"Nightcafe", true, false},
      {"Stable Diffusion 3", false, false}, {"Starry AI", true, false},
  };
}

std::vector<SourceId> extension_sources() {
  return {
      {"AuraFlow", false, true},
      {"Pixart", false, true},
      {"Playground v2.5", false, true},
      {"Tencent Hunyuan", false, true},
  };
}

std::vector<SourceId> all_sources() {
  auto out = core_sources();
  auto ext = extension_sources();
  out.insert(out.end(), ext.begin(), ext.end());
  std::sort(out.begin(), out.end(),
            [](const SourceId& a, const SourceId& b) { return a.name < b.name; });
  return out;
}

std::string source_slug(std::string_view name) {
  std::string out;
  bool dash = false;
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
      dash = false;
    } else if (!dash && !out.empty()) {
      out.push_back('-');
      dash = true;
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

namespace {
std::string char_tag(CharacterId c) {
  std::string digits = std::to_string(c);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return "c" + digits;
}
}  // namespace

std::string original_id(CharacterId character, std::string_view source) {
  return "orig-" + char_tag(character) + "-" + source_slug(source);
}

std::string resynthesis_id(CharacterId character, std::string_view parent_source,
                           std::string_view generating_source) {
  return "res-" + char_tag(character) + "-" + source_slug(parent_source) + "-" +
         source_slug(generating_source);
}

std::string primary_prompt_id(CharacterId character) { return "prompt-" + char_tag(character); }

std::string secondary_prompt_id(std::string_view original) {
  return "caption-" + std::string(original);
}

namespace {

void add_original_with_panel(CharacterId c, const SourceId& source,
                             std::span<const SourceId> panel_sources,
                             std::vector<ImageRecord>& images,
                             std::vector<PromptRecord>& prompts) {
  const std::string oid = original_id(c, source.name);
  images.push_back({oid, ImageKind::original, source.name, c, primary_prompt_id(c),
                    std::nullopt, oid + ".png"});
  const std::string caption = secondary_prompt_id(oid);
  prompts.push_back({caption, PromptKind::secondary,
                     "Secondary description of character " + std::to_string(c) + " as drawn by " +
                         source.name,
                     c, oid});
  for (const auto& gen : panel_sources) {
    const std::string rid = resynthesis_id(c, source.name, gen.name);
    images.push_back({rid, ImageKind::resynthesis, gen.name, c, caption, oid, rid + ".png"});
  }
}

}  // namespace

Manifest build_layout(std::vector<SourceId> sources, std::span<const CharacterId> characters) {
  std::sort(sources.begin(), sources.end(),
            [](const SourceId& a, const SourceId& b) { return a.name < b.name; });
  std::vector<CharacterId> chars(characters.begin(), characters.end());
  std::sort(chars.begin(), chars.end());

  std::vector<PromptRecord> prompts;
  std::vector<ImageRecord> images;
  images.reserve(chars.size() * sources.size() * (sources.size() + 1));
  for (CharacterId c : chars) {
    prompts.push_back({primary_prompt_id(c), PromptKind::primary,
                       "Head-and-shoulder portrait of novel character " + std::to_string(c),
                       c, std::nullopt});
    for (const auto& s : sources) add_original_with_panel(c, s, sources, images, prompts);
  }
  return Manifest(std::move(sources), std::move(prompts), std::move(images));
}

ExtensionParts build_extension_layout(const Manifest& test_manifest,
                                      std::span<const SourceId> new_sources) {
  std::vector<SourceId> every = test_manifest.sources();
  every.insert(every.end(), new_sources.begin(), new_sources.end());
  std::sort(every.begin(), every.end(),
            [](const SourceId& a, const SourceId& b) { return a.name < b.name; });
  std::vector<SourceId> added(new_sources.begin(), new_sources.end());
  std::sort(added.begin(), added.end(),
            [](const SourceId& a, const SourceId& b) { return a.name < b.name; });

  ExtensionParts parts;
  for (CharacterId c : test_manifest.characters()) {
    if (test_manifest.split_of(c) != Split::test) continue;
    for (const auto& s : added) add_original_with_panel(c, s, every, parts.images, parts.prompts);
  }
  for (const ImageRecord* orig : test_manifest.originals(Split::test)) {
    for (const auto& gen : added) {
      const std::string rid = resynthesis_id(orig->character, orig->source, gen.name);
      parts.images.push_back({rid, ImageKind::resynthesis, gen.name, orig->character,
                              secondary_prompt_id(orig->id), orig->id, rid + ".png"});
    }
  }
  return parts;
}

}  // namespace resynth
