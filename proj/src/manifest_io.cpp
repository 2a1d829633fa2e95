#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "resynth/dataset.hpp"

namespace resynth {

using ojson = nlohmann::ordered_json;

void save_manifest(const Manifest& manifest, std::ostream& out) {
  out << ojson{{"record_type", "header"}, {"format_version", kManifestFormatVersion}}.dump()
      << '\n';
  for (const auto& s : manifest.sources()) {
    out << ojson{{"record_type", "source"},
                 {"name", s.name},
                 {"commercial", s.commercial},
                 {"extension_only", s.extension_only}}
               .dump()
        << '\n';
  }
  for (const auto& p : manifest.prompts()) {
    ojson j{{"record_type", "prompt"},
            {"id", p.id},
            {"kind", to_string(p.kind)},
            {"text", p.text},
            {"character", p.character}};
    if (p.described_image) j["described_image"] = *p.described_image;
    out << j.dump() << '\n';
  }
  for (const auto& img : manifest.images()) {
    ojson j{{"record_type", "image"}, {"id", img.id},
            {"kind", to_string(img.kind)}, {"source", img.source},
            {"character", img.character}, {"prompt", img.prompt}};
    if (img.parent_original) j["parent_original"] = *img.parent_original;
    j["content_ref"] = img.content_ref;
    out << j.dump() << '\n';
  }
  for (const auto& [c, s] : manifest.split()) {
    out << ojson{{"record_type", "split"}, {"character", c}, {"split", to_string(s)}}.dump()
        << '\n';
  }
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  save_manifest(manifest, out);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

namespace {

struct LineParser {
  const nlohmann::json& j;
  std::uint64_t line;

  const nlohmann::json& field(const char* name) const {
    auto it = j.find(name);
    if (it == j.end()) throw FormatError(std::string("missing field '") + name + "'", line);
    return *it;
  }
  std::string str(const char* name) const {
    const auto& v = field(name);
    if (!v.is_string()) throw FormatError(std::string("field '") + name + "' must be a string", line);
    return v.get<std::string>();
  }
  std::optional<std::string> opt_str(const char* name) const {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw FormatError(std::string("field '") + name + "' must be a string", line);
    return it->get<std::string>();
  }
  int integer(const char* name) const {
    const auto& v = field(name);
    if (!v.is_number_integer()) throw FormatError(std::string("field '") + name + "' must be an integer", line);
    return v.get<int>();
  }
  bool boolean(const char* name, bool fallback) const {
    auto it = j.find(name);
    if (it == j.end()) return fallback;
    if (!it->is_boolean()) throw FormatError(std::string("field '") + name + "' must be a boolean", line);
    return it->get<bool>();
  }
};

}  // namespace

Manifest load_manifest(std::istream& in) {
  std::vector<SourceId> sources;
  std::vector<PromptRecord> prompts;
  std::vector<ImageRecord> images;
  SplitMap split;

  std::string text;
  std::uint64_t line = 0;
  bool saw_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), line);
    }
    if (!j.is_object()) throw FormatError("record is not an object", line);
    LineParser p{j, line};
    const std::string type = p.str("record_type");

    if (!saw_header) {
      if (type != "header") throw FormatError("first record must be the header", line);
      if (p.integer("format_version") != kManifestFormatVersion)
        throw FormatError("unsupported format_version", line);
      saw_header = true;
      continue;
    }

    if (type == "source") {
      sources.push_back({p.str("name"), p.boolean("commercial", false),
                         p.boolean("extension_only", false)});
    } else if (type == "prompt") {
      const std::string kind = p.str("kind");
      if (kind != "primary" && kind != "secondary")
        throw FormatError("unknown prompt kind '" + kind + "'", line);
      prompts.push_back({p.str("id"),
                         kind == "primary" ? PromptKind::primary : PromptKind::secondary,
                         p.str("text"), p.integer("character"), p.opt_str("described_image")});
    } else if (type == "image") {
      const std::string kind = p.str("kind");
      if (kind != "original" && kind != "resynthesis")
        throw FormatError("unknown image kind '" + kind + "'", line);
      images.push_back({p.str("id"),
                        kind == "original" ? ImageKind::original : ImageKind::resynthesis,
                        p.str("source"), p.integer("character"), p.str("prompt"),
                        p.opt_str("parent_original"), p.str("content_ref")});
    } else if (type == "split") {
      const int c = p.integer("character");
      Split s;
      try {
        s = parse_split(p.str("split"));
      } catch (const ConfigError& e) {
        throw FormatError(e.what(), line);
      }
      auto [it, inserted] = split.emplace(c, s);
      if (!inserted && it->second != s)
        throw FormatError("conflicting split records for character " + std::to_string(c), line);
    } else if (type == "header") {
      throw FormatError("duplicate header record", line);
    } else {
      throw FormatError("unknown record_type '" + type + "'", line);
    }
  }
  if (!saw_header) throw FormatError("missing header record", line);

  try {
    return Manifest(std::move(sources), std::move(prompts), std::move(images), std::move(split));
  } catch (const ManifestError& e) {
    throw FormatError(e.what(), line);
  }
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  return load_manifest(in);
}

}  // namespace resynth
