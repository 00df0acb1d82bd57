#include <doctest.h>

#include <cmath>

#include "dsanet/afsa.hpp"
#include "dsanet/errors.hpp"
#include "dsanet/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace dsanet;
using namespace dsanet::afsa;
using testing::random_tensor;

TEST_CASE("identical maps have similarity one") {
  Rng rng(1);
  const Var f(random_tensor({4, 3, 3}, rng));
  const SimilarityMap s = channel_similarity(f, f);
  CHECK(s.data.shape() == Shape{4, 9});
  for (double v : s.data.value().values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("orthogonal channels have similarity zero") {
  const Var a(Tensor({1, 1, 2}, {1.0, 0.0}));
  const Var b(Tensor({1, 1, 2}, {0.0, 1.0}));
  CHECK(channel_similarity(a, b).data.value().max_abs() == 0.0);
}

TEST_CASE("zero-norm channels map to zero similarity without gradient") {
  Tensor a({2, 2, 2}, 1.0), b({2, 2, 2}, 2.0);
  for (int i = 0; i < 4; ++i) a[i] = 0.0;
  Var va(a, true), vb(b, true);
  const SimilarityMap s = channel_similarity(va, vb);
  CHECK(s.data.value().at(0, 0) == 0.0);
  CHECK(s.data.value().at(1, 0) == doctest::Approx(1.0));
  backward(ops::sum(s.data));
  for (double g : va.grad().values()) CHECK(std::isfinite(g));
}

TEST_CASE("per-channel cosine matches the loop oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor({4, 3, 3}, rng), b = random_tensor({4, 3, 3}, rng);
    CHECK(max_abs_diff(channel_similarity(Var(a), Var(b)).data.value(), oracle::channel_cosine(a, b)) < 1e-12);
  }
}

TEST_CASE("similarity is scale invariant and bounded") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor a = random_tensor({3, 4, 2}, rng), b = random_tensor({3, 4, 2}, rng);
    Tensor sa = a, sb = b;
    sa *= uniform(rng, 0.01, 100.0);
    sb *= uniform(rng, 0.01, 100.0);
    const Tensor s = channel_similarity(Var(a), Var(b)).data.value();
    CHECK(max_abs_diff(s, channel_similarity(Var(sa), Var(sb)).data.value()) < 1e-6);
    for (double v : s.values()) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("literal mode is the sign of the product") {
  const Var a(Tensor({1, 1, 4}, {1.0, -2.0, 0.0, 3.0}));
  const Var b(Tensor({1, 1, 4}, {2.0, 1.0, 5.0, 0.5}));
  const SimilarityMap s = channel_similarity(a, b, SimilarityMode::kElementwiseLiteral);
  CHECK(s.data.value() == Tensor({1, 4}, {1.0, -1.0, 0.0, 1.0}));
}

TEST_CASE("refine is an elementwise product") {
  Rng rng(4);
  const Tensor f = random_tensor({3, 2, 2}, rng);
  const SimilarityMap ones{Var(Tensor({3, 4}, 1.0))};
  CHECK(refine(ones, Var(f)).value() == f);
  const SimilarityMap zeros{Var(Tensor({3, 4}))};
  CHECK(refine(zeros, Var(f)).value().max_abs() == 0.0);
  const Tensor s = random_tensor({3, 4}, rng);
  CHECK(refine(SimilarityMap{Var(s)}, Var(f)).value() == oracle::refine(s, f));
  CHECK_THROWS_AS(refine(SimilarityMap{Var(s)}, Var(random_tensor({3, 3, 3}, rng))), ShapeError);
}

TEST_CASE("temporal fuse on constant maps") {
  CHECK(temporal_fuse(Var(Tensor({2, 3, 3}, 1.0)), Var(Tensor({2, 3, 3}, 1.0))).value().max_abs() == 1.0);
  const Tensor out = temporal_fuse(Var(Tensor({2, 3, 3}, 2.0)), Var(Tensor({2, 3, 3}, 3.0))).value();
  for (double v : out.values()) CHECK(v == doctest::Approx(18.0));
}

TEST_CASE("temporal fuse matches the loop oracle") {
  Rng rng(5);
  const Tensor a = random_tensor({2, 2, 2}, rng), b = random_tensor({2, 2, 2}, rng);
  CHECK(max_abs_diff(temporal_fuse(Var(a), Var(b)).value(), oracle::temporal_fuse(a, b)) < 1e-12);
  CHECK_THROWS_AS(temporal_fuse(Var(a), Var(random_tensor({2, 2, 3}, rng))), ShapeError);
}

TEST_CASE("chain composition and arity") {
  Rng rng(6);
  const Tensor a = random_tensor({3, 4, 4}, rng), b = random_tensor({3, 4, 4}, rng), c = random_tensor({3, 4, 4}, rng);
  CHECK(afsa_chain({Var(a), Var(b)}).value() == afsa_step(Var(a), Var(b)).value());
  const Tensor expect = afsa_step(afsa_step(Var(a), Var(b)), Var(c)).value();
  CHECK(afsa_chain({Var(a), Var(b), Var(c)}).value() == expect);
  CHECK(afsa_chain({Var(a), Var(b), Var(c)}).shape() == a.shape());
  CHECK_THROWS_AS(afsa_chain({Var(a)}), ArityError);

  // Constant positive channels: S = 1 at each step, so each step multiplies
  // by both channel means. Two steps on value v give v^5 for the last frame
  // equal to v: G1 = v*v*v, G2 = mean(G1)*v*v = v^5.
  const Tensor k({2, 2, 2}, 1.5);
  const Tensor out = afsa_chain({Var(k), Var(k), Var(k)}).value();
  for (double v : out.values()) CHECK(v == doctest::Approx(std::pow(1.5, 5)));
}

TEST_CASE("chain gradient matches finite differences") {
  Rng rng(7);
  auto f = [](const std::vector<Var>& v) { return ops::sum(afsa_chain(v)); };
  const double err = testing::gradient_check(
      f, {random_tensor({2, 4, 4}, rng), random_tensor({2, 4, 4}, rng), random_tensor({2, 4, 4}, rng)});
  CHECK(err < 1e-4);
}

TEST_CASE("cosine similarity varies less under noise than the literal map") {
  Rng rng(8);
  const Tensor signal = random_tensor({4, 6, 6}, rng, 0.5, 1.5);
  std::vector<Tensor> cos, lit;
  for (int draw = 0; draw < 100; ++draw) {
    Tensor a = signal, b = signal;
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] += uniform(rng, -1.0, 1.0);
      b[i] += uniform(rng, -1.0, 1.0);
    }
    cos.push_back(channel_similarity(Var(a), Var(b)).data.value());
    lit.push_back(channel_similarity(Var(a), Var(b), SimilarityMode::kElementwiseLiteral).data.value());
  }
  auto mean_var = [](const std::vector<Tensor>& xs) {
    double total = 0.0;
    for (std::size_t i = 0; i < xs[0].size(); ++i) {
      double m = 0.0, s = 0.0;
      for (const auto& x : xs) m += x[i];
      m /= xs.size();
      for (const auto& x : xs) s += (x[i] - m) * (x[i] - m);
      total += s / xs.size();
    }
    return total / xs[0].size();
  };
  CHECK(mean_var(cos) < mean_var(lit));
}

TEST_CASE("pixel cross attention reference") {
  Rng rng(9);
  const Tensor prev = random_tensor({3, 1, 1}, rng), cur = random_tensor({3, 1, 1}, rng);
  CHECK(max_abs_diff(pixel_cross_attention_fuse(prev, cur), prev) < 1e-12);  // single token, identity value

  const Tensor a = random_tensor({4, 5, 5}, rng);
  const Tensor out = pixel_cross_attention_fuse(a, a);
  CHECK(out.shape() == a.shape());
  CHECK(out.all_finite());
  CHECK_THROWS_AS(pixel_cross_attention_fuse(a, random_tensor({4, 5, 4}, rng)), ShapeError);
}
