#include "resynth/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "resynth/hash.hpp"

namespace resynth {

Image::Image(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw OperatorError("image dimensions must be positive");
  rgb.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0);
}

double mean_absolute_error(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw DimensionError("images differ in size");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i)
    acc += std::abs(static_cast<int>(a.rgb[i]) - static_cast<int>(b.rgb[i]));
  return acc / static_cast<double>(a.rgb.size());
}

Image make_fixture_image(int width, int height, std::uint64_t seed) {
  Image img(width, height);
  CounterRng rng(hash_key("fixture-image", seed));
  const double cx = width * (0.4 + 0.2 * rng.uniform());
  const double cy = height * (0.35 + 0.1 * rng.uniform());
  const double head = std::min(width, height) * 0.22;
  const double hue[3] = {0.6 + 0.4 * rng.uniform(), 0.4 + 0.4 * rng.uniform(), 0.3 + 0.4 * rng.uniform()};

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x) / width;
      const double fy = static_cast<double>(y) / height;
      const double dx = (x - cx) / head, dy = (y - cy) / (head * 1.25);
      const double face = std::exp(-(dx * dx + dy * dy) * 1.5);
      const double sx = (x - cx) / (head * 2.2), sy = (y - height * 0.95) / (head * 1.3);
      const double body = std::exp(-(sx * sx + sy * sy) * 2.0);
      const double texture = 0.5 + 0.5 * std::sin(x * 0.9 + 0.3 * y) * std::cos(y * 0.7);
      for (int c = 0; c < 3; ++c) {
        const double background = 40.0 + 90.0 * fy + 30.0 * fx * (c + 1) / 3.0;
        double v = background * (1.0 - face - 0.6 * body) + 210.0 * hue[c] * face +
                   120.0 * hue[2 - c] * body + 18.0 * texture + 10.0 * (rng.uniform() - 0.5);
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return img;
}

void write_png(const Image& image, const std::filesystem::path& path) {
  const Bytes bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Image read_image(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  if (!bytes) throw Error("cannot read image '" + path.string() + "'");
  return decode_image(*bytes);
}

}  // namespace resynth
