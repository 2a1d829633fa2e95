#pragma once

// Dataset graph: sources, characters, prompts, originals, resyntheses and the
// character-level split, plus the structural checks that tie them together.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "resynth/error.hpp"

namespace resynth {

struct SourceId {
  std::string name;
  bool commercial = false;
  bool extension_only = false;

  friend bool operator==(const SourceId&, const SourceId&) = default;
};

using CharacterId = int;

enum class PromptKind { primary, secondary };
enum class ImageKind { original, resynthesis };
enum class Split { train, val, test };

std::string_view to_string(PromptKind kind) noexcept;
std::string_view to_string(ImageKind kind) noexcept;
std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);

inline constexpr std::size_t kMaxPromptChars = 200;

struct PromptRecord {
  std::string id;
  PromptKind kind = PromptKind::primary;
  std::string text;
  CharacterId character = 0;
  std::optional<std::string> described_image;  // secondary prompts only

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

struct ImageRecord {
  std::string id;
  ImageKind kind = ImageKind::original;
  std::string source;
  CharacterId character = 0;
  std::string prompt;
  std::optional<std::string> parent_original;  // resyntheses only
  std::string content_ref;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

using SplitMap = std::map<CharacterId, Split>;

// Structural fault in manifest construction (duplicate ids or names).
class ManifestError : public Error {
 public:
  using Error::Error;
};

// Immutable dataset graph. Sources are kept in canonical (lexicographic by
// name) order; images and prompts keep insertion order.
class Manifest {
 public:
  Manifest() = default;
  Manifest(std::vector<SourceId> sources, std::vector<PromptRecord> prompts,
           std::vector<ImageRecord> images, SplitMap split = {});

  const std::vector<SourceId>& sources() const noexcept { return sources_; }
  const std::vector<PromptRecord>& prompts() const noexcept { return prompts_; }
  const std::vector<ImageRecord>& images() const noexcept { return images_; }
  const SplitMap& split() const noexcept { return split_; }

  const SourceId* find_source(std::string_view name) const;
  const ImageRecord* find_image(std::string_view id) const;
  const PromptRecord* find_prompt(std::string_view id) const;
  std::optional<Split> split_of(CharacterId character) const;

  // Sorted distinct characters referenced by images or prompts.
  std::vector<CharacterId> characters() const;

  std::size_t count(ImageKind kind) const;
  std::size_t count(ImageKind kind, Split split) const;

  // Originals ordered by (character, source, id); restricted to one split
  // when given.
  std::vector<const ImageRecord*> originals(std::optional<Split> split = std::nullopt) const;

  // Resyntheses whose parent_original is `original_id`, in insertion order.
  std::vector<const ImageRecord*> children_of(std::string_view original_id) const;

  // True when any image was produced by an extension-only source.
  bool is_extended() const;

  // Sources every original must have a resynthesis from: all sources in an
  // extended manifest, otherwise the non-extension ones. Canonical order.
  std::vector<std::string> panel_sources() const;

  Manifest with_split(SplitMap split) const;

  friend bool operator==(const Manifest& a, const Manifest& b);

 private:
  std::vector<SourceId> sources_;
  std::vector<PromptRecord> prompts_;
  std::vector<ImageRecord> images_;
  SplitMap split_;
  std::map<std::string, std::size_t, std::less<>> source_index_;
  std::map<std::string, std::size_t, std::less<>> image_index_;
  std::map<std::string, std::size_t, std::less<>> prompt_index_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> children_;
};

// Seeded shuffle of the sorted character list, then contiguous assignment:
// the first `train` characters go to train, the next `val` to val, the rest
// to test.
Manifest build_split(const Manifest& manifest, std::size_t train, std::size_t val,
                     std::size_t test, std::uint64_t seed);

enum class ViolationKind { completeness, linkage, split_purity, prompt_length, reference };
std::string_view to_string(ViolationKind kind) noexcept;

struct Violation {
  ViolationKind kind;
  std::string subject;  // id of the offending record
  std::string detail;

  std::string message() const;
};

struct SplitCounts {
  std::size_t originals = 0;
  std::size_t resyntheses = 0;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::size_t originals = 0;
  std::size_t resyntheses = 0;
  std::size_t prompts = 0;
  std::size_t characters = 0;
  std::map<Split, SplitCounts> per_split;

  bool valid() const noexcept { return violations.empty(); }
  std::size_t count(ViolationKind kind) const;
};

ValidationReport validate_manifest(const Manifest& manifest);

// Adds test-only sources and their images to a test-split manifest.
// Every extension image must reference a character whose split is test.
Manifest merge_extension(const Manifest& test_manifest, std::vector<ImageRecord> extension_images,
                         std::vector<SourceId> new_sources,
                         std::vector<PromptRecord> extension_prompts = {});

// Full resynthesis panel of an original keyed by source name.
std::map<std::string, std::string> resyntheses_of(const Manifest& manifest,
                                                  std::string_view original_id);

// Keeps only the characters assigned to `split`, with their images and prompts.
Manifest restrict_to_split(const Manifest& manifest, Split split);

// ---------------------------------------------------------------------------
// Canonical layouts

std::vector<SourceId> core_sources();       // the ten core generators
std::vector<SourceId> extension_sources();  // the four test-only generators
std::vector<SourceId> all_sources();

std::string source_slug(std::string_view name);
std::string original_id(CharacterId character, std::string_view source);
std::string resynthesis_id(CharacterId character, std::string_view parent_source,
                           std::string_view generating_source);
std::string primary_prompt_id(CharacterId character);
std::string secondary_prompt_id(std::string_view original);

// One original per (character, source) and one resynthesis per (original,
// source), with primary and secondary prompts linked accordingly. Content
// refs are `<image id>.png`.
Manifest build_layout(std::vector<SourceId> sources, std::span<const CharacterId> characters);

struct ExtensionParts {
  std::vector<ImageRecord> images;
  std::vector<PromptRecord> prompts;
};

// Images the test-only sources add to a test manifest: new originals for
// every (test character, new source), their full panels over all sources,
// and new-source resyntheses of the existing originals.
ExtensionParts build_extension_layout(const Manifest& test_manifest,
                                      std::span<const SourceId> new_sources);

// ---------------------------------------------------------------------------
// Newline-delimited JSON serialization. A header record
// {"record_type":"header","format_version":1} is mandatory and first.

inline constexpr int kManifestFormatVersion = 1;

void save_manifest(const Manifest& manifest, std::ostream& out);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(std::istream& in);
Manifest load_manifest(const std::filesystem::path& path);

// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text) noexcept;

}  // namespace resynth
