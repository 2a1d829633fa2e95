#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "resynth/image.hpp"
#include "resynth/perturb.hpp"

using namespace resynth;

namespace {

std::string image_name(int i) { return "orig-" + std::to_string(i); }

}  // namespace

TEST(SampleParams, StaysInRange) {
  for (Operator op : kOperators) {
    const PerturbSpec spec = PerturbSpec::defaults(op, 3);
    for (int i = 0; i < 10000; ++i) {
      const PerturbDraw d = sample_params(spec, image_name(i));
      EXPECT_EQ(d.op, op);
      if (!spec.range) {
        EXPECT_FALSE(d.value.has_value());
        continue;
      }
      ASSERT_TRUE(d.value.has_value());
      EXPECT_GE(*d.value, spec.range->low);
      EXPECT_LE(*d.value, spec.range->high);
      if (integer_valued(op)) EXPECT_EQ(*d.value, std::round(*d.value));
    }
  }
}

TEST(SampleParams, ParameterFreeOperators) {
  EXPECT_FALSE(PerturbSpec::defaults(Operator::blur).range.has_value());
  EXPECT_FALSE(PerturbSpec::defaults(Operator::greyscale).range.has_value());
  const auto social = PerturbSpec::defaults(Operator::social);
  ASSERT_TRUE(social.range.has_value());
  EXPECT_EQ(social.range->low, 82.0);
  EXPECT_EQ(social.range->high, 82.0);
}

TEST(SampleParams, JpegQualityIsUniformOverIntegers) {
  const PerturbSpec spec = PerturbSpec::defaults(Operator::jpeg, 1);
  double sum = 0.0;
  std::set<int> seen;
  for (int i = 0; i < 10000; ++i) {
    const double q = *sample_params(spec, image_name(i)).value;
    sum += q;
    seen.insert(static_cast<int>(q));
  }
  EXPECT_NEAR(sum / 10000.0, 74.5, 1.0);
  EXPECT_EQ(seen.size(), 50u);
}

TEST(SampleParams, DeterministicPerImageAndSeed) {
  const PerturbSpec a = PerturbSpec::defaults(Operator::rotation, 5);
  EXPECT_EQ(sample_params(a, "x"), sample_params(a, "x"));
  int differ_by_image = 0, differ_by_seed = 0;
  const PerturbSpec b = PerturbSpec::defaults(Operator::rotation, 6);
  for (int i = 0; i < 100; ++i) {
    differ_by_image += sample_params(a, image_name(i)) != sample_params(a, image_name(i + 1));
    differ_by_seed += sample_params(a, image_name(i)).value != sample_params(b, image_name(i)).value;
  }
  EXPECT_GT(differ_by_image, 90);
  EXPECT_GT(differ_by_seed, 90);
}

TEST(SampleParams, DrawDoesNotDependOnOtherOperators) {
  // The rotation draw for an image is the same whatever else is sampled.
  const PerturbSpec rot = PerturbSpec::defaults(Operator::rotation, 2);
  const auto before = sample_params(rot, "img");
  for (Operator op : kOperators) sample_params(PerturbSpec::defaults(op, 2), "img");
  EXPECT_EQ(sample_params(rot, "img"), before);
}

TEST(Operators, NamesRoundTrip) {
  for (Operator op : kOperators) EXPECT_EQ(parse_operator(to_string(op)), op);
  EXPECT_EQ(display_name(Operator::jpeg), "JPEG");
  EXPECT_THROW(parse_operator("sharpen"), Error);
}

TEST(Geometry, CropDims) {
  EXPECT_EQ(crop_dims(100, 100, 0.64), std::make_pair(80, 80));
  const Image img = make_fixture_image(100, 100, 1);
  const Image c = central_crop(img, 0.64);
  EXPECT_EQ(c.width, 80);
  EXPECT_EQ(c.height, 80);
  // Central: top-left of the crop is pixel (10, 10) of the source.
  EXPECT_EQ(c.at(0, 0, 0), img.at(10, 10, 0));
  EXPECT_THROW(central_crop(img, 0.0), OperatorError);
}

TEST(Geometry, RescaleDims) {
  EXPECT_EQ(rescale_dims(100, 50, 0.5), std::make_pair(50, 25));
  EXPECT_EQ(rescale_dims(100, 50, 2.0), std::make_pair(200, 100));
  const Image r = rescale(make_fixture_image(40, 30, 2), 1.5);
  EXPECT_EQ(r.width, 60);
  EXPECT_EQ(r.height, 45);
}

TEST(Pixel, GreyscaleIsIdempotentAndGrey) {
  const Image img = make_fixture_image(64, 48, 3);
  const Image g = to_greyscale(img);
  EXPECT_EQ(to_greyscale(g), g);
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      EXPECT_EQ(g.at(x, y, 0), g.at(x, y, 1));
      EXPECT_EQ(g.at(x, y, 1), g.at(x, y, 2));
    }
}

TEST(Pixel, ZeroRotationWithNearestIsIdentity) {
  const Image img = make_fixture_image(33, 21, 4);
  EXPECT_EQ(rotate(img, 0.0, Interpolation::nearest), img);
}

TEST(Pixel, UnitFactorsAreIdentity) {
  const Image img = make_fixture_image(32, 32, 5);
  EXPECT_EQ(scale_brightness(img, 1.0), img);
  EXPECT_EQ(scale_contrast(img, 1.0), img);
}

TEST(Pixel, BrightnessSaturates) {
  const Image img = make_fixture_image(32, 32, 6);
  const Image b = scale_brightness(img, 2.4);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) {
    EXPECT_GE(b.rgb[i], img.rgb[i]);
    EXPECT_LE(std::abs(int(b.rgb[i]) - std::min(255, int(std::lround(img.rgb[i] * 2.4)))), 1);
  }
}

TEST(Pixel, BlurPreservesSizeAndSmooths) {
  const Image img = make_fixture_image(64, 64, 7);
  const Image b = gaussian_blur(img, 2.0);
  EXPECT_EQ(b.width, 64);
  EXPECT_EQ(b.height, 64);
  EXPECT_GT(mean_absolute_error(img, b), 0.0);
}

TEST(Codec, LowerJpegQualityLosesMore) {
  const Image img = make_fixture_image(128, 128, 8);
  const double low = mean_absolute_error(img, jpeg_roundtrip(img, 50));
  const double high = mean_absolute_error(img, jpeg_roundtrip(img, 99));
  EXPECT_GT(low, high);
}

TEST(Codec, WebpAndPngRoundTrip) {
  const Image img = make_fixture_image(48, 40, 9);
  EXPECT_EQ(decode_image(encode_png(img)), img);
  const Image w = webp_roundtrip(img, 80);
  EXPECT_EQ(w.width, 48);
  EXPECT_EQ(w.height, 40);
}

TEST(Apply, SocialCapsLongestSide) {
  const Image img = make_fixture_image(200, 100, 10);
  ApplyOptions opt;
  opt.social_longest_side = 120;
  const PerturbDraw d{"x", Operator::social, 82.0};
  const Image s = apply(img, d, opt);
  EXPECT_EQ(s.width, 120);
  EXPECT_EQ(s.height, 60);
}

TEST(Apply, EveryOperatorProducesAValidImage) {
  const Image img = make_fixture_image(64, 64, 11);
  for (Operator op : kOperators) {
    const PerturbDraw d = sample_params(PerturbSpec::defaults(op, 1), "img");
    const Image out = apply(img, d);
    EXPECT_TRUE(out.valid()) << to_string(op);
    EXPECT_EQ(apply(img, d), out) << to_string(op);
  }
}

TEST(Apply, MissingParameterIsAnError) {
  const Image img = make_fixture_image(16, 16, 12);
  EXPECT_THROW(apply(img, PerturbDraw{"x", Operator::jpeg, std::nullopt}), OperatorError);
}

TEST(WriteDraws, JsonLines) {
  std::vector<PerturbDraw> draws{{"a", Operator::jpeg, 70.0}, {"b", Operator::blur, std::nullopt}};
  std::ostringstream out;
  write_draws(draws, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.at("image"), "a");
  EXPECT_EQ(j.at("operator"), "jpeg");
  EXPECT_EQ(j.at("parameter"), 70.0);
  std::getline(in, line);
  j = nlohmann::json::parse(line);
  EXPECT_TRUE(j.at("parameter").is_null());
}
