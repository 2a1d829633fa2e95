// OpenCV-backed image codecs. OpenCV works in BGR order; the conversion
// happens here so callers only ever see RGB.

#include <cstring>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "resynth/image.hpp"

namespace resynth {

namespace {

cv::Mat to_bgr(const Image& image) {
  if (!image.valid()) throw OperatorError("invalid RGB buffer");
  cv::Mat m(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width; ++x) {
      row[3 * x + 0] = image.at(x, y, 2);
      row[3 * x + 1] = image.at(x, y, 1);
      row[3 * x + 2] = image.at(x, y, 0);
    }
  }
  return m;
}

Bytes encode(const Image& image, const char* ext, std::vector<int> params) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(ext, to_bgr(image), buf, params))
    throw OperatorError(std::string("encoding to ") + ext + " failed");
  Bytes out(buf.size());
  std::memcpy(out.data(), buf.data(), buf.size());
  return out;
}

int check_quality(int quality) {
  if (quality < 1 || quality > 100) throw OperatorError("codec quality must be in [1, 100]");
  return quality;
}

}  // namespace

Bytes encode_png(const Image& image) {
  return encode(image, ".png", {cv::IMWRITE_PNG_COMPRESSION, 6});
}

Bytes encode_jpeg(const Image& image, int quality) {
  return encode(image, ".jpg", {cv::IMWRITE_JPEG_QUALITY, check_quality(quality)});
}

Bytes encode_webp(const Image& image, int quality) {
  return encode(image, ".webp", {cv::IMWRITE_WEBP_QUALITY, check_quality(quality)});
}

Image decode_image(std::span<const std::byte> bytes) {
  std::vector<std::uint8_t> buf(bytes.size());
  std::memcpy(buf.data(), bytes.data(), bytes.size());
  cv::Mat m = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (m.empty()) throw OperatorError("cannot decode image bytes");
  Image img(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) {
      img.at(x, y, 0) = row[3 * x + 2];
      img.at(x, y, 1) = row[3 * x + 1];
      img.at(x, y, 2) = row[3 * x + 0];
    }
  }
  return img;
}

}  // namespace resynth
