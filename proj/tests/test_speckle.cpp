#include <doctest.h>

#include <cmath>
#include <limits>

#include "dsanet/errors.hpp"
#include "dsanet/speckle.hpp"

using namespace dsanet;

namespace {

std::pair<double, double> factor_stats(double look, std::uint64_t seed, int side = 400) {
  const Image img({side, side}, 0.5);
  const Image out = apply_speckle(img, SpeckleConfig::with_look(look, seed, false));
  double mean = 0.0;
  for (double v : out.values()) mean += v / 0.5;
  mean /= out.size();
  double var = 0.0;
  for (double v : out.values()) var += (v / 0.5 - mean) * (v / 0.5 - mean);
  return {mean, var / (out.size() - 1)};
}

}  // namespace

TEST_CASE("gamma factor has unit mean and variance 1/L") {
  const auto [mean, var] = factor_stats(25.0, 1);
  CHECK(std::abs(mean - 1.0) < 0.01);
  CHECK(std::abs(var - 0.04) < 0.005);
  const auto [mean20, var20] = factor_stats(20.0, 1);
  CHECK(var20 > var);
  CHECK(var20 / var == doctest::Approx(1.25).epsilon(0.05));
  (void)mean20;
}

TEST_CASE("very large look numbers barely change the image") {
  Image img({32, 32});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = double(i % 17) / 16.0;
  CHECK(max_abs_diff(apply_speckle(img, SpeckleConfig::with_look(1e9, 3)), img) < 1e-3);
}

TEST_CASE("zero stays zero and clipping keeps the range") {
  CHECK(apply_speckle(Image({8, 8}), SpeckleConfig::with_look(5, 1)).max_abs() == 0.0);
  const Image bright = apply_speckle(Image({64, 64}, 0.95), SpeckleConfig::with_look(2, 1));
  for (double v : bright.values()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("invalid look numbers are configuration errors") {
  CHECK_THROWS_AS(apply_speckle(Image({2, 2}), SpeckleConfig::with_look(0.0, 1)), ConfigError);
  CHECK_THROWS_AS(apply_speckle(Image({2, 2}), SpeckleConfig::with_look(-3.0, 1)), ConfigError);
}

TEST_CASE("noise tags") {
  CHECK(noise_tag(SpeckleConfig::clean()) == "clean");
  CHECK(noise_tag(SpeckleConfig::with_look(25, 0)) == "L25");
  CHECK(noise_tag(SpeckleConfig::with_look(20, 0)) == "L20");
  CHECK(noise_tag(SpeckleConfig::with_look(12.5, 0)) == "L12.5");
}

TEST_CASE("clip noise leaves masks alone and is deterministic per source frame") {
  ClipSample clip;
  clip.video_id = "video_0003";
  clip.frame_indices = {4, 4, 5};
  for (int k = 0; k < 3; ++k) {
    clip.frames.push_back(Image({16, 16}, 0.5));
    Image m({16, 16});
    m[k] = 1.0;
    clip.masks.push_back(m);
  }
  const ClipSample clean = apply_speckle_clip(clip, SpeckleConfig::clean());
  CHECK(clean.frames == clip.frames);
  CHECK(clean.noise_tag == "clean");

  const ClipSample noisy = apply_speckle_clip(clip, SpeckleConfig::with_look(25, 9));
  CHECK(noisy.masks == clip.masks);
  CHECK(noisy.noise_tag == "L25");
  CHECK(noisy.frames[0] == noisy.frames[1]);  // same source frame
  CHECK(noisy.frames[1] != noisy.frames[2]);
  CHECK(apply_speckle_clip(clip, SpeckleConfig::with_look(25, 9)).frames == noisy.frames);
}
