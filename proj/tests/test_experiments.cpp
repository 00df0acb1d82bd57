#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "dsanet/checkpoint.hpp"
#include "dsanet/errors.hpp"
#include "dsanet/experiments.hpp"
#include "dsanet/plots.hpp"

using namespace dsanet;
using namespace dsanet::experiments;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "dsanet_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny(Variant v = Variant::kFull) {
  ExperimentConfig c = ExperimentConfig::for_profile(Profile::kDesk);
  c.variant = v;
  c.synth.num_videos = 2;
  c.synth.frames_per_video = 4;
  c.synth_val_videos = 1;
  c.synth_test_videos = 1;
  c.epochs = 1;
  c.max_steps = 3;
  return c;
}

std::vector<ClipSample> clips_of(const std::vector<VideoRecord>& videos) { return enumerate_clips(videos, 3); }

std::string read_bytes(const fs::path& p) { return read_text(p); }

}  // namespace

TEST_CASE("synthetic splits are disjoint and sized by the config") {
  const ExperimentConfig c = tiny();
  const Splits s = make_synthetic_splits(c);
  CHECK(s.train.size() == 2);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 1);
  CHECK(s.train[0].frames[0] != s.test[0].frames[0]);
  CHECK(clips_of(s.train).size() == 8);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const ExperimentConfig c = tiny();
  const auto clips = clips_of(make_synthetic_splits(c).train);
  const TrainResult a = train(c, clips);
  const TrainResult b = train(c, clips);
  REQUIRE(a.log.steps.size() == 3);
  CHECK(a.log == b.log);
  for (std::size_t i = 0; i < a.model->params().size(); ++i)
    CHECK(a.model->params().entries()[i].second.value() == b.model->params().entries()[i].second.value());

  ExperimentConfig other = c;
  other.seed = 1;
  CHECK(train(other, clips).log != a.log);
}

TEST_CASE("loss decreases over a short run") {
  ExperimentConfig c = tiny(Variant::kBaseline);
  c.max_steps = 30;
  c.epochs = 100;
  const auto clips = clips_of(make_synthetic_splits(c).train);
  const TrainResult r = train(c, clips);
  CHECK(r.log.steps.back().loss < r.log.steps.front().loss);
}

TEST_CASE("zero learning rate keeps the initial parameters") {
  ExperimentConfig c = tiny();
  c.learning_rate = 0.0;
  const auto clips = clips_of(make_synthetic_splits(c).train);
  const TrainResult r = train(c, clips);
  auto fresh = build_model(c);
  for (std::size_t i = 0; i < fresh->params().size(); ++i)
    CHECK(fresh->params().entries()[i].second.value() == r.model->params().entries()[i].second.value());
}

TEST_CASE("training writes checkpoints, logs and a manifest") {
  const fs::path dir = scratch("train_out");
  const ExperimentConfig c = tiny();
  const Splits s = make_synthetic_splits(c);
  TrainOptions o;
  o.out_dir = dir;
  o.validation = clips_of(s.val);
  const TrainResult r = train(c, clips_of(s.train), o);
  CHECK(fs::exists(dir / "final.ckpt"));
  CHECK(fs::exists(dir / "best.ckpt"));
  CHECK(r.log.epochs.size() == 1);
  CHECK(TrainLog::parse(read_text(dir / "train_log.txt")) == r.log);
  const std::string manifest = read_text(dir / "manifest.txt");
  CHECK(manifest.find("seed.init=" + std::to_string(stream_seed(c.seed, SeedStream::kInit))) != std::string::npos);
  CHECK(manifest.find("seed.shuffle=") != std::string::npos);
  CHECK(manifest.find("graph=") != std::string::npos);
  CHECK(r.manifest.value("graph.baseline").find("encoder_decoder") != std::string::npos);
}

TEST_CASE("non-finite loss halts with the last good checkpoint") {
  const fs::path dir = scratch("diverge");
  ExperimentConfig c = tiny();
  c.batch_size = 1;
  auto clips = clips_of(make_synthetic_splits(c).train);
  clips.resize(2);
  c.flip_probability = 0.0;
  clips[1].frames[2][5] = std::numeric_limits<double>::quiet_NaN();
  c.max_steps = 0;
  TrainOptions o;
  o.out_dir = dir;
  CHECK_THROWS_AS(train(c, clips, o), DivergenceError);
  REQUIRE(fs::exists(dir / "last_good.ckpt"));
  const Checkpoint ck = load_checkpoint(dir / "last_good.ckpt");
  for (const auto& [name, t] : ck.tensors) CHECK(t.all_finite());
}

TEST_CASE("evaluation is pure, shard-invariant and survives a checkpoint round trip") {
  const fs::path dir = scratch("eval_rt");
  const ExperimentConfig c = tiny();
  const Splits s = make_synthetic_splits(c);
  TrainOptions o;
  o.out_dir = dir;
  const TrainResult r = train(c, clips_of(s.train), o);
  const auto test = clips_of(s.test);
  EvalOptions eo;
  eo.input_size = c.input_size;
  const SpeckleConfig noisy = SpeckleConfig::with_look(20, 3);
  const auto first = evaluate(*r.model, test, noisy, eo);
  CHECK(first == evaluate(*r.model, test, noisy, eo));
  CHECK(first.noise_tag == "L20");
  CHECK(first.n_frames == 4);

  EvalOptions sharded = eo;
  sharded.threads = 3;
  auto parallel = evaluate(*r.model, test, noisy, sharded);
  CHECK(parallel.threads == 3);
  parallel.threads = first.threads;
  CHECK(parallel == first);

  const LoadedModel loaded = load_model(r.final_checkpoint, &c);
  CHECK(evaluate(*loaded.model, test, noisy, eo) == first);
  CHECK(loaded.config.variant == c.variant);

  ExperimentConfig mismatch = c;
  mismatch.variant = Variant::kBaseline;
  CHECK_THROWS_AS(load_model(r.final_checkpoint, &mismatch), VersionError);
  ExperimentConfig narrower = c;
  narrower.backbone.fusion_channels = 16;
  CHECK_THROWS_AS(load_model(r.final_checkpoint, &narrower), VersionError);
}

TEST_CASE("ablation emits four variants by three noise levels") {
  const fs::path dir = scratch("ablate");
  ExperimentConfig c = tiny();
  c.max_steps = 1;
  const Splits s = make_synthetic_splits(c);
  AblationOptions o;
  o.seeds = {0};
  o.out_dir = dir;
  const AblationResult r = run_ablation(c, clips_of(s.train), clips_of(s.test), o);
  CHECK(r.mean.size() == 12);
  CHECK(r.per_seed.size() == 12);
  CHECK(metrics::parse_records(read_text(dir / "metrics.txt")).size() == 12);
  for (Variant v : kAllVariants) CHECK(std::isfinite(r.dice_drop(v, "L20")));
  CHECK(r.report.table.find("BASELINE_LGSA") != std::string::npos);
}

TEST_CASE("noise sweep covers clean plus every look") {
  const ExperimentConfig c = tiny();
  const Splits s = make_synthetic_splits(c);
  auto model = build_model(c);
  EvalOptions eo;
  const auto reports = noise_sweep(*model, clips_of(s.test), {25, 20, 10}, 0, eo);
  REQUIRE(reports.size() == 4);
  CHECK(reports[0].noise_tag == "clean");
  CHECK(reports[3].noise_tag == "L10");
}

TEST_CASE("fps benchmark is positive") {
  const ExperimentConfig c = tiny(Variant::kBaseline);
  auto model = build_model(c);
  const auto r = bench_fps(*model, 64, 1, 10);
  CHECK(r.fps > 0.0);
}

TEST_CASE("plots are byte-stable and leave metrics untouched") {
  const fs::path dir = scratch("plots");
  const ExperimentConfig c = tiny();
  const Splits s = make_synthetic_splits(c);
  const TrainResult r = train(c, clips_of(s.train));
  const auto test = clips_of(s.test);
  const std::vector<ClipSample> picked(test.begin(), test.begin() + 3);
  const auto probs = predict_targets(*r.model, picked, SpeckleConfig::clean(), c.input_size);
  EvalOptions eo;
  std::vector<metrics::MetricsReport> reports{evaluate(*r.model, test, SpeckleConfig::clean(), eo)};
  const auto before = reports;

  const auto files = plots::emit_plots(dir / "a", &r.log, &reports, &picked, &probs);
  CHECK(files.written.size() == 5);
  CHECK(reports == before);
  int overlays = 0;
  for (const auto& f : files.written) overlays += f.filename().string().rfind("overlay_", 0) == 0;
  CHECK(overlays == 3);

  plots::emit_plots(dir / "b", &r.log, &reports, &picked, &probs);
  for (const auto& f : files.written) CHECK(read_bytes(f) == read_bytes(dir / "b" / f.filename()));

  const fs::path blocker = dir / "file";
  write_text(blocker, "x");
  CHECK_THROWS_AS(plots::emit_plots(blocker / "sub", &r.log, nullptr), IoError);
}

TEST_CASE("threads come from the environment") {
  ::setenv("DSANET_THREADS", "3", 1);
  CHECK(compute_threads() == 3);
  ::setenv("DSANET_THREADS", "zero", 1);
  CHECK_THROWS_AS(compute_threads(), ConfigError);
  ::unsetenv("DSANET_THREADS");
  CHECK(compute_threads() == 1);
}
