#include <doctest.h>

#include "dsanet/encoder_decoder.hpp"
#include "dsanet/errors.hpp"
#include "dsanet/ops.hpp"
#include "support/gradcheck.hpp"

using namespace dsanet;
using testing::random_tensor;

namespace {

BackboneConfig wide() {
  BackboneConfig c;
  c.stage_channels = {16, 32, 64, 128};
  c.fusion_channels = 32;
  return c;
}

}  // namespace

TEST_CASE("encoder stage shapes follow the stride arithmetic") {
  ParameterStore params;
  Rng rng(1);
  EncoderDecoder net(wide(), params, rng);
  Rng data(2);
  const auto stages = net.encode(random_tensor({64, 64}, data, 0, 1));
  REQUIRE(stages.size() == 4);
  CHECK(stages[0].shape() == Shape{16, 16, 16});
  CHECK(stages[1].shape() == Shape{32, 8, 8});
  CHECK(stages[2].shape() == Shape{64, 4, 4});
  CHECK(stages[3].shape() == Shape{128, 2, 2});

  const FeaturePyramid p = net.decode_local(stages);
  CHECK(p.levels[0].shape() == Shape{32, 16, 16});
  CHECK(p.levels[1].shape() == Shape{32, 8, 8});
  CHECK(p.levels[2].shape() == Shape{32, 4, 4});
  CHECK(p.levels[3].shape() == Shape{32, 2, 2});
  CHECK(p.channels() == 32);
}

TEST_CASE("identical frames give identical features") {
  ParameterStore params;
  Rng rng(1);
  EncoderDecoder net(BackboneConfig{}, params, rng);
  Rng data(3);
  const Image f = random_tensor({64, 64}, data, 0, 1);
  const auto a = net.decode_local(net.encode(f));
  const auto b = net.decode_local(net.encode(f));
  for (int i = 0; i < 4; ++i) CHECK(a.levels[i].value() == b.levels[i].value());
}

TEST_CASE("sizes not divisible by 32 are rejected") {
  ParameterStore params;
  Rng rng(1);
  EncoderDecoder net(BackboneConfig{}, params, rng);
  CHECK_THROWS_AS(net.encode(Image({65, 65})), ShapeError);
  CHECK_THROWS_AS(net.encode(Image({48, 64})), ShapeError);
}

TEST_CASE("zero stages decode to a zero pyramid") {
  ParameterStore params;
  Rng rng(1);
  EncoderDecoder net(wide(), params, rng);
  std::vector<Var> stages{Var(Tensor({16, 16, 16})), Var(Tensor({32, 8, 8})), Var(Tensor({64, 4, 4})),
                          Var(Tensor({128, 2, 2}))};
  const auto p = net.decode_local(stages);
  for (const Var& l : p.levels) CHECK(l.value().max_abs() == 0.0);
}

TEST_CASE("decoder gradient matches finite differences") {
  BackboneConfig c;
  c.stage_channels = {4, 4, 4, 4};
  c.fusion_channels = 4;
  ParameterStore params;
  Rng rng(5);
  EncoderDecoder net(c, params, rng);
  Rng data(6);
  auto f = [&](const std::vector<Var>& s) {
    const auto p = net.decode_local(s);
    Var total = ops::sum(p.levels[0]);
    for (int i = 1; i < 4; ++i) total = ops::add(total, ops::sum(p.levels[i]));
    return total;
  };
  const double err = testing::gradient_check(
      f, {random_tensor({4, 8, 8}, data), random_tensor({4, 4, 4}, data), random_tensor({4, 2, 2}, data),
          random_tensor({4, 1, 1}, data)});
  CHECK(err < 1e-4);
}

TEST_CASE("backbone config validation") {
  BackboneConfig c;
  c.fusion_channels = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
