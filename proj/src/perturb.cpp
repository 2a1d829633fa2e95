#include "resynth/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "resynth/hash.hpp"

namespace resynth {

std::string_view to_string(Operator op) noexcept {
  switch (op) {
    case Operator::blur: return "blur";
    case Operator::brightness: return "brightness";
    case Operator::contrast: return "contrast";
    case Operator::crop: return "crop";
    case Operator::greyscale: return "greyscale";
    case Operator::jpeg: return "jpeg";
    case Operator::resize: return "resize";
    case Operator::rotation: return "rotation";
    case Operator::social: return "social";
    case Operator::webp: return "webp";
  }
  return "blur";
}

std::string_view display_name(Operator op) noexcept {
  switch (op) {
    case Operator::blur: return "Blur";
    case Operator::brightness: return "Brightness";
    case Operator::contrast: return "Contrast";
    case Operator::crop: return "Crop";
    case Operator::greyscale: return "Greyscale";
    case Operator::jpeg: return "JPEG";
    case Operator::resize: return "Resize";
    case Operator::rotation: return "Rotation";
    case Operator::social: return "Social";
    case Operator::webp: return "WEBP";
  }
  return "Blur";
}

Operator parse_operator(std::string_view name) {
  for (Operator op : kOperators) {
    if (name == to_string(op) || name == display_name(op)) return op;
  }
  throw ConfigError("unknown operator '" + std::string(name) + "'");
}

PerturbSpec PerturbSpec::defaults(Operator op, std::uint64_t seed) {
  PerturbSpec spec{op, std::nullopt, seed};
  switch (op) {
    case Operator::blur:
    case Operator::greyscale: break;
    case Operator::brightness:
    case Operator::contrast: spec.range = ParameterRange{1.2, 2.4}; break;
    case Operator::crop: spec.range = ParameterRange{0.5, 0.9}; break;
    case Operator::jpeg:
    case Operator::webp: spec.range = ParameterRange{50.0, 99.0}; break;
    case Operator::resize: spec.range = ParameterRange{0.4, 2.0}; break;
    case Operator::rotation: spec.range = ParameterRange{-5.0, 5.0}; break;
    case Operator::social: spec.range = ParameterRange{82.0, 82.0}; break;
  }
  return spec;
}

bool integer_valued(Operator op) noexcept {
  return op == Operator::jpeg || op == Operator::webp || op == Operator::social;
}

PerturbDraw sample_params(const PerturbSpec& spec, std::string_view image) {
  PerturbDraw draw{std::string(image), spec.op, std::nullopt};
  if (!spec.range) return draw;
  const double u = unit_interval(hash_key(spec.seed, image, to_string(spec.op)));
  double v = spec.range->low + u * (spec.range->high - spec.range->low);
  if (integer_valued(spec.op)) v = std::round(v);
  draw.value = v;
  return draw;
}

// ---------------------------------------------------------------------------
// Operators

namespace {

std::uint8_t clamp_byte(double v) noexcept {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void require_valid(const Image& image) {
  if (!image.valid()) throw OperatorError("invalid RGB buffer");
}

double require_param(const PerturbDraw& draw) {
  if (!draw.value)
    throw OperatorError("operator '" + std::string(to_string(draw.op)) + "' needs a parameter");
  return *draw.value;
}

int quality_of(double v) { return static_cast<int>(std::lround(v)); }

}  // namespace

Image gaussian_blur(const Image& image, double sigma) {
  require_valid(image);
  if (!(sigma > 0.0)) throw OperatorError("blur sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (auto& w : kernel) w /= sum;

  const int W = image.width, H = image.height;
  std::vector<double> tmp(static_cast<std::size_t>(W) * H * 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = std::clamp(x + k, 0, W - 1);
          acc += kernel[static_cast<std::size_t>(k + radius)] * image.at(xx, y, c);
        }
        tmp[(static_cast<std::size_t>(y) * W + x) * 3 + c] = acc;
      }

  Image out(W, H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int yy = std::clamp(y + k, 0, H - 1);
          acc += kernel[static_cast<std::size_t>(k + radius)] *
                 tmp[(static_cast<std::size_t>(yy) * W + x) * 3 + c];
        }
        out.at(x, y, c) = clamp_byte(acc);
      }
  return out;
}

Image scale_brightness(const Image& image, double factor) {
  require_valid(image);
  Image out = image;
  for (auto& v : out.rgb) v = clamp_byte(v * factor);
  return out;
}

Image scale_contrast(const Image& image, double factor) {
  require_valid(image);
  Image out = image;
  for (auto& v : out.rgb) v = clamp_byte((v - 128.0) * factor + 128.0);
  return out;
}

std::pair<int, int> crop_dims(int width, int height, double area_fraction) {
  if (!(area_fraction > 0.0 && area_fraction <= 1.0))
    throw OperatorError("crop area fraction must lie in (0, 1]");
  const double side = std::sqrt(area_fraction);
  const int w = static_cast<int>(std::lround(width * side));
  const int h = static_cast<int>(std::lround(height * side));
  if (w < 1 || h < 1) throw OperatorError("crop output below 1 px");
  return {w, h};
}

Image central_crop(const Image& image, double area_fraction) {
  require_valid(image);
  const auto [w, h] = crop_dims(image.width, image.height, area_fraction);
  const int x0 = (image.width - w) / 2;
  const int y0 = (image.height - h) / 2;
  Image out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(x0 + x, y0 + y, c);
  return out;
}

Image to_greyscale(const Image& image) {
  require_valid(image);
  Image out(image.width, image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const std::uint8_t luma = clamp_byte(0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) +
                                           0.114 * image.at(x, y, 2));
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = luma;
    }
  return out;
}

Image jpeg_roundtrip(const Image& image, int quality) {
  require_valid(image);
  return decode_image(encode_jpeg(image, quality));
}

Image webp_roundtrip(const Image& image, int quality) {
  require_valid(image);
  return decode_image(encode_webp(image, quality));
}

Image resize_bilinear(const Image& image, int width, int height) {
  require_valid(image);
  if (width < 1 || height < 1) throw OperatorError("resize output below 1 px");
  Image out(width, height);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c);
        const double bottom = (1 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c);
        out.at(x, y, c) = clamp_byte((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

std::pair<int, int> rescale_dims(int width, int height, double scale) {
  if (!(scale > 0.0)) throw OperatorError("resize scale must be positive");
  const int w = static_cast<int>(std::lround(width * scale));
  const int h = static_cast<int>(std::lround(height * scale));
  if (w < 1 || h < 1) throw OperatorError("resize output below 1 px");
  return {w, h};
}

Image rescale(const Image& image, double scale) {
  require_valid(image);
  const auto [w, h] = rescale_dims(image.width, image.height, scale);
  return resize_bilinear(image, w, h);
}

Image rotate(const Image& image, double degrees, Interpolation interp) {
  require_valid(image);
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cx = (image.width - 1) / 2.0, cy = (image.height - 1) / 2.0;
  Image out(image.width, image.height);  // out-of-frame pixels stay black

  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double fx = cx + cs * dx - sn * dy;
      const double fy = cy + sn * dx + cs * dy;
      if (fx < -0.5 || fy < -0.5 || fx >= image.width - 0.5 || fy >= image.height - 0.5) continue;
      if (interp == Interpolation::nearest) {
        const int nx = std::clamp(static_cast<int>(std::lround(fx)), 0, image.width - 1);
        const int ny = std::clamp(static_cast<int>(std::lround(fy)), 0, image.height - 1);
        for (int c = 0; c < 3; ++c) out.at(x, y, c) = image.at(nx, ny, c);
        continue;
      }
      const double cfx = std::clamp(fx, 0.0, image.width - 1.0);
      const double cfy = std::clamp(fy, 0.0, image.height - 1.0);
      const int x0 = static_cast<int>(cfx), y0 = static_cast<int>(cfy);
      const int x1 = std::min(x0 + 1, image.width - 1), y1 = std::min(y0 + 1, image.height - 1);
      const double wx = cfx - x0, wy = cfy - y0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - wx) * image.at(x0, y0, c) + wx * image.at(x1, y0, c);
        const double bottom = (1 - wx) * image.at(x0, y1, c) + wx * image.at(x1, y1, c);
        out.at(x, y, c) = clamp_byte((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

Image social_upload(const Image& image, int longest_side, int quality) {
  require_valid(image);
  if (longest_side < 1) throw OperatorError("social longest side must be positive");
  const int longest = std::max(image.width, image.height);
  const double scale = static_cast<double>(longest_side) / longest;
  int w = static_cast<int>(std::lround(image.width * scale));
  int h = static_cast<int>(std::lround(image.height * scale));
  if (image.width >= image.height) w = longest_side; else h = longest_side;
  if (w < 1 || h < 1) throw OperatorError("social resize output below 1 px");
  return jpeg_roundtrip(resize_bilinear(image, w, h), quality);
}

Image apply(const Image& image, const PerturbDraw& draw, const ApplyOptions& options) {
  require_valid(image);
  switch (draw.op) {
    case Operator::blur: return gaussian_blur(image, options.blur_sigma);
    case Operator::greyscale: return to_greyscale(image);
    case Operator::brightness: return scale_brightness(image, require_param(draw));
    case Operator::contrast: return scale_contrast(image, require_param(draw));
    case Operator::crop: return central_crop(image, require_param(draw));
    case Operator::jpeg: return jpeg_roundtrip(image, quality_of(require_param(draw)));
    case Operator::webp: return webp_roundtrip(image, quality_of(require_param(draw)));
    case Operator::resize: return rescale(image, require_param(draw));
    case Operator::rotation:
      return rotate(image, require_param(draw), options.rotation_interpolation);
    case Operator::social:
      return social_upload(image, options.social_longest_side, quality_of(require_param(draw)));
  }
  throw OperatorError("unknown operator");
}

void write_draws(std::span<const PerturbDraw> draws, std::ostream& out) {
  for (const auto& d : draws) {
    nlohmann::ordered_json j;
    j["image"] = d.image;
    j["operator"] = to_string(d.op);
    j["parameter"] = d.value ? nlohmann::ordered_json(*d.value) : nlohmann::ordered_json(nullptr);
    out << j.dump() << '\n';
  }
}

}  // namespace resynth
