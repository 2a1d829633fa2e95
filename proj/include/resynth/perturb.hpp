#pragma once

// Post-processing operators for the robustness task. Each image gets its own
// parameter draw, derived from (seed, image id, operator) alone, so every
// method under evaluation sees byte-identical inputs.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "resynth/image.hpp"

namespace resynth {

enum class Operator { blur, brightness, contrast, crop, greyscale, jpeg, resize, rotation, social, webp };

// Column order of the robustness table.
inline constexpr std::array<Operator, 10> kOperators = {
    Operator::blur,   Operator::brightness, Operator::contrast, Operator::crop,
    Operator::greyscale, Operator::jpeg,    Operator::resize,   Operator::rotation,
    Operator::social, Operator::webp,
};

std::string_view to_string(Operator op) noexcept;
std::string_view display_name(Operator op) noexcept;  // "Blur", "JPEG", ...
Operator parse_operator(std::string_view name);

struct ParameterRange {
  double low = 0.0;
  double high = 0.0;
};

struct PerturbSpec {
  Operator op = Operator::blur;
  std::optional<ParameterRange> range;  // nullopt: parameter-free operator
  std::uint64_t seed = 0;

  // Default ranges: brightness/contrast factor [1.2, 2.4], crop area
  // [0.5, 0.9], jpeg/webp quality [50, 99], resize scale [0.4, 2.0],
  // rotation degrees [-5, 5], social jpeg quality fixed at 82; blur and
  // greyscale take no parameter.
  static PerturbSpec defaults(Operator op, std::uint64_t seed = 0);
};

// Quality factors are whole numbers.
bool integer_valued(Operator op) noexcept;

struct PerturbDraw {
  std::string image;
  Operator op = Operator::blur;
  std::optional<double> value;

  friend bool operator==(const PerturbDraw&, const PerturbDraw&) = default;
};

PerturbDraw sample_params(const PerturbSpec& spec, std::string_view image);

enum class Interpolation { bilinear, nearest };

struct ApplyOptions {
  double blur_sigma = 2.0;
  int social_longest_side = 1080;
  Interpolation rotation_interpolation = Interpolation::bilinear;
};

Image apply(const Image& image, const PerturbDraw& draw, const ApplyOptions& options = {});

// Individual operators.
Image gaussian_blur(const Image& image, double sigma);
Image scale_brightness(const Image& image, double factor);
Image scale_contrast(const Image& image, double factor);
Image central_crop(const Image& image, double area_fraction);
Image to_greyscale(const Image& image);
Image jpeg_roundtrip(const Image& image, int quality);
Image webp_roundtrip(const Image& image, int quality);
Image resize_bilinear(const Image& image, int width, int height);
Image rescale(const Image& image, double scale);
Image rotate(const Image& image, double degrees, Interpolation interp = Interpolation::bilinear);
Image social_upload(const Image& image, int longest_side, int quality);

// Output sizes of the geometric operators.
std::pair<int, int> crop_dims(int width, int height, double area_fraction);
std::pair<int, int> rescale_dims(int width, int height, double scale);

// One JSON object per line: {image, operator, parameter}.
void write_draws(std::span<const PerturbDraw> draws, std::ostream& out);

}  // namespace resynth
