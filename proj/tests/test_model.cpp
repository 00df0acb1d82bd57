#include <doctest.h>

#include "dsanet/autograd.hpp"
#include "dsanet/errors.hpp"
#include "dsanet/model.hpp"
#include "dsanet/ops.hpp"
#include "support/gradcheck.hpp"

using namespace dsanet;
using testing::random_tensor;

namespace {

std::vector<Image> clip(Rng& rng, int size = 64) {
  return {random_tensor({size, size}, rng, 0, 1), random_tensor({size, size}, rng, 0, 1),
          random_tensor({size, size}, rng, 0, 1)};
}

ModelConfig config_for(Variant v) {
  ModelConfig c;
  c.variant = v;
  return c;
}

}  // namespace

TEST_CASE("variant names") {
  for (Variant v : kAllVariants) CHECK(parse_variant(to_string(v)) == v);
  CHECK(parse_variant("baseline-afsa") == Variant::kBaselineAfsa);
  CHECK(parse_variant("Full") == Variant::kFull);
  CHECK_THROWS_AS(parse_variant("everything"), ConfigError);
}

TEST_CASE("variant graphs") {
  CHECK(VariantGraph::of(Variant::kBaseline) == VariantGraph{false, false});
  CHECK(VariantGraph::of(Variant::kBaselineAfsa) == VariantGraph{true, false});
  CHECK(VariantGraph::of(Variant::kBaselineLgsa) == VariantGraph{false, true});
  CHECK(VariantGraph::of(Variant::kFull) == VariantGraph{true, true});
}

TEST_CASE("forward produces one logit map per frame") {
  Rng rng(1);
  const auto frames = clip(rng);
  for (Variant v : kAllVariants) {
    DsaNet net(config_for(v));
    const ClipOutput out = net.forward(frames);
    REQUIRE(out.logits.size() == 3);
    for (const Var& l : out.logits) {
      CHECK(l.shape() == Shape{1, 64, 64});
      CHECK(l.value().all_finite());
    }
    NoGradGuard g;
    CHECK(max_abs_diff(net.forward_target(frames).value(), out.logits.back().value()) < 1e-12);
  }
}

TEST_CASE("parameter sets follow the variant") {
  DsaNet base(config_for(Variant::kBaseline));
  DsaNet afsa(config_for(Variant::kBaselineAfsa));
  DsaNet lgsa(config_for(Variant::kBaselineLgsa));
  DsaNet full(config_for(Variant::kFull));
  CHECK(base.params().element_count() == afsa.params().element_count());  // AFSA is parameter-free
  CHECK(lgsa.params().element_count() > base.params().element_count());
  CHECK(full.architecture_signature() != lgsa.architecture_signature());
  CHECK_FALSE(base.params().contains("lgsa.head.weight"));
  CHECK(full.params().contains("lgsa.head.weight"));
}

TEST_CASE("FULL with AFSA switched off has the BASELINE_LGSA architecture") {
  ModelConfig c = config_for(Variant::kFull);
  c.afsa_enabled = false;
  DsaNet full_off(c);
  DsaNet lgsa(config_for(Variant::kBaselineLgsa));
  CHECK(full_off.graph() == lgsa.graph());
  CHECK(full_off.architecture_signature() == lgsa.architecture_signature());
  Rng rng(2);
  const auto frames = clip(rng);
  NoGradGuard g;
  CHECK(full_off.forward_target(frames).value() == lgsa.forward_target(frames).value());
}

TEST_CASE("target prediction depends on context frames only when AFSA is active") {
  Rng rng(3);
  auto frames = clip(rng);
  auto other = frames;
  other[0] = random_tensor({64, 64}, rng, 0, 1);
  NoGradGuard g;
  DsaNet base(config_for(Variant::kBaseline));
  CHECK(base.forward_target(frames).value() == base.forward_target(other).value());
  DsaNet full(config_for(Variant::kFull));
  CHECK(full.forward_target(frames).value() != full.forward_target(other).value());
}

TEST_CASE("same init seed gives the same model") {
  Rng rng(4);
  const auto frames = clip(rng);
  DsaNet a(config_for(Variant::kFull)), b(config_for(Variant::kFull));
  NoGradGuard g;
  CHECK(a.forward_target(frames).value() == b.forward_target(frames).value());
}

TEST_CASE("every parameter of FULL receives gradient") {
  Rng rng(5);
  DsaNet net(config_for(Variant::kFull));
  const ClipOutput out = net.forward(clip(rng));
  Var total = ops::sum(out.logits[0]);
  for (int k = 1; k < 3; ++k) total = ops::add(total, ops::sum(out.logits[k]));
  backward(total);
  for (const auto& [name, v] : net.params().entries()) {
    INFO(name);
    CHECK(v.has_grad());
  }
}

TEST_CASE("full auxiliary path runs the variant path for every frame") {
  ModelConfig c = config_for(Variant::kFull);
  c.aux_path = AuxPath::kFullPath;
  DsaNet net(c);
  Rng rng(6);
  const auto frames = clip(rng);
  const ClipOutput out = net.forward(frames);
  NoGradGuard g;
  // Frame 0 sees a left-padded context of itself only.
  const std::vector<Image> padded{frames[0], frames[0], frames[0]};
  CHECK(max_abs_diff(out.logits[0].value(), net.forward_target(padded).value()) < 1e-12);
}

TEST_CASE("wrong clip length is an arity error") {
  DsaNet net(config_for(Variant::kFull));
  Rng rng(7);
  auto frames = clip(rng);
  frames.pop_back();
  CHECK_THROWS_AS(net.forward(frames), ArityError);
  CHECK_THROWS_AS(net.forward_target(frames), ArityError);
}
