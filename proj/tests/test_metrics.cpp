#include <doctest.h>

#include <thread>

#include "dsanet/errors.hpp"
#include "dsanet/metrics.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace dsanet;
using namespace dsanet::metrics;
using testing::random_mask;
using testing::random_tensor;

TEST_CASE("mae anchors") {
  Rng rng(1);
  const Tensor g = random_mask({6, 6}, rng);
  CHECK(mae(g, g) == 0.0);
  CHECK(mae(Tensor({6, 6}, 0.5), g) == doctest::Approx(50.0));
  const Tensor p = random_tensor({4, 4}, rng, 0.0, 1.0);
  const Tensor g4 = random_mask({4, 4}, rng);
  CHECK(std::abs(mae(p, g4) - oracle::mae(p, g4)) < 1e-12);
  Tensor pi = p, gi = g4;
  for (double& v : pi.values()) v = 1.0 - v;
  for (double& v : gi.values()) v = 1.0 - v;
  CHECK(mae(pi, gi) == doctest::Approx(mae(p, g4)));
  CHECK_THROWS_AS(mae(p, Tensor({4, 5})), ShapeError);
}

TEST_CASE("binarised mae uses the 0.5 threshold") {
  const Tensor p({1, 4}, {0.2, 0.6, 0.4, 0.9});
  const Tensor g({1, 4}, {0.0, 1.0, 1.0, 1.0});
  CHECK(mae(p, g, true) == doctest::Approx(25.0));
}

TEST_CASE("iou and dice anchors") {
  Tensor p({4, 4}), g({4, 4});
  for (int i : {0, 1, 2, 3}) p[i] = 1.0;
  for (int i : {2, 3, 4, 5}) g[i] = 1.0;
  const auto [iou, dice] = iou_dice(p, g);
  CHECK(iou == doctest::Approx(100.0 * 2 / 6));
  CHECK(dice == doctest::Approx(50.0));

  CHECK(iou_dice(g, g) == std::pair<double, double>{100.0, 100.0});
  Tensor disjoint({4, 4});
  disjoint[10] = 1.0;
  CHECK(iou_dice(disjoint, g) == std::pair<double, double>{0.0, 0.0});
  CHECK(iou_dice(Tensor({4, 4}), Tensor({4, 4})) == std::pair<double, double>{100.0, 100.0});
}

TEST_CASE("metrics match oracles, dice dominates iou, order does not matter") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor p = random_tensor({4, 4}, rng, 0.0, 1.0);
    const Tensor g = random_mask({4, 4}, rng);
    const auto [iou, dice] = iou_dice(p, g);
    const auto [oi, od] = oracle::iou_dice(p, g);
    CHECK(std::abs(iou - oi) < 1e-12);
    CHECK(std::abs(dice - od) < 1e-12);
    CHECK(dice >= iou);
    Tensor pr(p.shape()), gr(g.shape());
    for (std::size_t i = 0; i < p.size(); ++i) {
      pr[i] = p[p.size() - 1 - i];
      gr[i] = g[g.size() - 1 - i];
    }
    CHECK(iou_dice(pr, gr) == iou_dice(p, g));
    CHECK(mae(pr, gr) == doctest::Approx(mae(p, g)));
  }
}

TEST_CASE("accumulator averages frames") {
  Accumulator acc;
  const Tensor g({2, 2}, {1, 0, 0, 0});
  acc.add(g, g);
  acc.add(Tensor({2, 2}, 0.5), g);
  const MetricsReport r = acc.report("FULL", "L25");
  CHECK(r.n_frames == 2);
  CHECK(r.mae == doctest::Approx(25.0));
  CHECK(r.variant == "FULL");
  CHECK(r.noise_tag == "L25");
}

TEST_CASE("benchmark harness") {
  int calls = 0;
  const auto r = benchmark_fps([&] { ++calls; std::this_thread::sleep_for(std::chrono::microseconds(200)); }, 2, 10);
  CHECK(calls == 12);
  CHECK(r.fps > 0.0);
  CHECK(r.timed_iters == 10);
  CHECK_THROWS_AS(benchmark_fps([] {}, 0, 10), ConfigError);
  CHECK_THROWS_AS(benchmark_fps([] {}, 1, 9), ConfigError);
}

TEST_CASE("report formatting") {
  CHECK(format_report({}, Layout::kRows).records.empty());
  CHECK(format_report({}, Layout::kRows).table.find("Dice") != std::string::npos);

  std::vector<MetricsReport> rows;
  for (const char* v : {"BASELINE", "FULL"})
    for (const char* tag : {"L20", "clean", "L25"}) {
      MetricsReport r;
      r.variant = v;
      r.noise_tag = tag;
      r.dice = std::string(tag) == "clean" ? 90.0 : 87.5;
      r.iou = 80.0;
      r.mae = 1.25;
      r.n_frames = 4;
      rows.push_back(r);
    }
  const FormattedReport t2 = format_report(rows, Layout::kGrouped);
  const auto clean = t2.table.find("clean"), l25 = t2.table.find("L25"), l20 = t2.table.find("L20");
  CHECK(clean < l25);
  CHECK(l25 < l20);
  CHECK(t2.table.find("↓2.5") != std::string::npos);
  CHECK(parse_records(t2.records).size() == 6);
}

TEST_CASE("records round trip exactly") {
  MetricsReport r;
  r.variant = "BASELINE_AFSA";
  r.noise_tag = "L25";
  r.mae = 1.0 / 3.0;
  r.iou = 88.12345678901234;
  r.dice = 93.5;
  r.fps = 38.3;
  r.n_frames = 48;
  r.threads = 2;
  CHECK(parse_record(format_record(r)) == r);
  r.fps.reset();
  CHECK(parse_record(format_record(r)) == r);
  CHECK(parse_records(format_record(r) + "\n" + format_record(r) + "\n").size() == 2);
}
