#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dsanet/config.hpp"
#include "dsanet/errors.hpp"
#include "dsanet/experiments.hpp"
#include "dsanet/plots.hpp"

namespace fs = std::filesystem;
using namespace dsanet;
using nlohmann::json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string variant;
  std::optional<std::uint64_t> seed;
  std::vector<double> noise_looks;
  std::optional<std::uint64_t> noise_seed;
  bool clean = false;
  std::string out_dir;
  std::string checkpoint;
  std::string profile = "desk";
  std::string data_dir;
  std::string split = "test";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "Experiment config file ([section] key=value)");
  cmd->add_option("--variant", f.variant, "BASELINE, BASELINE_AFSA, BASELINE_LGSA or FULL");
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--noise-L", f.noise_looks, "Speckle look number(s)");
  cmd->add_option("--noise-seed", f.noise_seed, "Seed for evaluation speckle");
  cmd->add_flag("--clean", f.clean, "Evaluate without added speckle");
  cmd->add_option("--out", f.out_dir, "Output directory");
  cmd->add_option("--checkpoint", f.checkpoint, "Checkpoint path");
  cmd->add_option("--profile", f.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--data", f.data_dir, "Dataset root written by `synth` (default: generate in memory)");
}

ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig c = ExperimentConfig::for_profile(parse_profile(f.profile));
  if (!f.config_path.empty()) apply_config(c, ConfigFile::load(f.config_path));
  if (!f.variant.empty()) c.variant = parse_variant(f.variant);
  if (f.seed) c.seed = *f.seed;
  if (f.noise_seed) c.eval_noise.seed = *f.noise_seed;
  c.validate();
  return c;
}

experiments::Splits resolve_data(const CommonFlags& f, const ExperimentConfig& c) {
  if (!f.data_dir.empty()) return experiments::load_splits(f.data_dir);
  return experiments::make_synthetic_splits(c);
}

const std::vector<VideoRecord>& pick_split(const experiments::Splits& s, const std::string& split) {
  if (split == "train") return s.train;
  if (split == "val") return s.val;
  if (split == "test") return s.test;
  throw ConfigError("split must be train, val or test; got '" + split + "'");
}

fs::path require_out(const CommonFlags& f) {
  if (f.out_dir.empty()) throw ConfigError("--out DIR is required for this command");
  return f.out_dir;
}

experiments::LoadedModel require_model(const CommonFlags& f) {
  if (f.checkpoint.empty()) throw ConfigError("--checkpoint PATH is required for this command");
  if (!f.config_path.empty() || !f.variant.empty()) {
    const ExperimentConfig expected = resolve_config(f);
    return experiments::load_model(f.checkpoint, &expected);
  }
  return experiments::load_model(f.checkpoint);
}

void emit_reports(const std::vector<metrics::MetricsReport>& reports, metrics::Layout layout, const std::string& out) {
  const auto formatted = metrics::format_report(reports, layout);
  std::cout << formatted.table;
  if (!out.empty()) {
    experiments::write_text(fs::path(out) / "metrics.txt", formatted.records);
    experiments::write_text(fs::path(out) / "table.txt", formatted.table);
  }
}

int cmd_synth(const CommonFlags& f) {
  ExperimentConfig c = resolve_config(f);
  if (f.seed) c.synth.master_seed = *f.seed;
  const fs::path out = require_out(f);
  const auto splits = experiments::make_synthetic_splits(c);
  experiments::save_splits(splits, out);
  std::cout << "wrote " << splits.train.size() << " train, " << splits.val.size() << " val, " << splits.test.size()
            << " test videos to " << out.string() << '\n';
  return 0;
}

int cmd_train(const CommonFlags& f) {
  ExperimentConfig c = resolve_config(f);
  if (!f.noise_looks.empty()) {
    c.train_noise = true;
    c.train_noise_look = f.noise_looks.front();
  }
  const fs::path out = require_out(f);
  const auto splits = resolve_data(f, c);
  experiments::TrainOptions opts;
  opts.out_dir = out;
  opts.validation = experiments::enumerate_clips(splits.val, c.clip_length);
  opts.on_step = [](const experiments::StepRecord& r) {
    std::printf("step %ld epoch %d loss %.5f\n", r.step, r.epoch, r.loss);
  };
  const auto clips = experiments::enumerate_clips(splits.train, c.clip_length);
  auto result = experiments::train(c, clips, opts);
  std::cout << "final checkpoint: " << result.final_checkpoint.string() << '\n';
  if (!result.best_checkpoint.empty()) std::cout << "best-val checkpoint: " << result.best_checkpoint.string() << '\n';
  return 0;
}

std::vector<SpeckleConfig> noise_conditions(const CommonFlags& f, const ExperimentConfig& c) {
  std::vector<SpeckleConfig> out;
  if (f.clean || f.noise_looks.empty()) out.push_back(SpeckleConfig::clean());
  for (double look : f.noise_looks) out.push_back(SpeckleConfig::with_look(look, c.eval_noise.seed));
  return out;
}

int cmd_eval(const CommonFlags& f) {
  auto loaded = require_model(f);
  ExperimentConfig c = resolve_config(f);
  const auto splits = resolve_data(f, c);
  const auto clips = experiments::enumerate_clips(pick_split(splits, f.split), loaded.config.clip_length);
  experiments::EvalOptions eo;
  eo.input_size = loaded.config.input_size;
  eo.mae_binarized = c.mae_binarized;
  eo.threads = compute_threads();
  std::vector<metrics::MetricsReport> reports;
  for (const auto& noise : noise_conditions(f, c)) reports.push_back(experiments::evaluate(*loaded.model, clips, noise, eo));
  emit_reports(reports, metrics::Layout::kRows, f.out_dir);
  if (!f.out_dir.empty()) {
    json j = json::array();
    for (const auto& r : reports)
      j.push_back({{"variant", r.variant}, {"noise", r.noise_tag}, {"mae", r.mae}, {"iou", r.iou}, {"dice", r.dice},
                   {"frames", r.n_frames}, {"threads", r.threads}});
    experiments::write_text(fs::path(f.out_dir) / "summary.json", j.dump(2) + "\n");
  }
  return 0;
}

int cmd_ablate(const CommonFlags& f) {
  const ExperimentConfig c = resolve_config(f);
  const fs::path out = require_out(f);
  const auto splits = resolve_data(f, c);
  experiments::AblationOptions opts;
  opts.out_dir = out;
  if (!f.noise_looks.empty()) opts.looks = f.noise_looks;
  opts.progress = [](const std::string& msg) { std::cout << msg << std::endl; };
  const auto train_clips = experiments::enumerate_clips(splits.train, c.clip_length);
  const auto test_clips = experiments::enumerate_clips(splits.test, c.clip_length);
  const auto result = experiments::run_ablation(c, train_clips, test_clips, opts);
  std::cout << result.report.table;
  return 0;
}

int cmd_noise_sweep(const CommonFlags& f) {
  auto loaded = require_model(f);
  ExperimentConfig c = resolve_config(f);
  const auto splits = resolve_data(f, c);
  const auto clips = experiments::enumerate_clips(pick_split(splits, f.split), loaded.config.clip_length);
  std::vector<double> looks = f.noise_looks.empty() ? std::vector<double>{40, 25, 20, 10, 5} : f.noise_looks;
  experiments::EvalOptions eo;
  eo.input_size = loaded.config.input_size;
  eo.mae_binarized = c.mae_binarized;
  eo.threads = compute_threads();
  const auto reports = experiments::noise_sweep(*loaded.model, clips, looks, c.eval_noise.seed, eo);
  emit_reports(reports, metrics::Layout::kGrouped, f.out_dir);
  return 0;
}

int cmd_bench(const CommonFlags& f, int warmup, int iters) {
  std::unique_ptr<DsaNet> owned;
  int input_size = 0;
  std::string variant;
  if (!f.checkpoint.empty()) {
    auto loaded = require_model(f);
    owned = std::move(loaded.model);
    input_size = loaded.config.input_size;
  } else {
    const ExperimentConfig c = resolve_config(f);
    owned = experiments::build_model(c);
    input_size = c.input_size;
  }
  const int threads = compute_threads();
  const auto r = experiments::bench_fps(*owned, input_size, warmup, iters, threads);
  metrics::MetricsReport report;
  report.variant = to_string(owned->config().variant);
  report.fps = r.fps;
  report.threads = r.threads;
  std::printf("%s %dx%d: %.2f FPS over %d clips (%.3f s, %d thread%s)\n", report.variant.c_str(), input_size,
              input_size, r.fps, r.timed_iters, r.seconds, r.threads, r.threads == 1 ? "" : "s");
  if (!f.out_dir.empty()) {
    json j{{"variant", report.variant}, {"input_size", input_size}, {"fps", r.fps}, {"seconds", r.seconds},
           {"timed_iters", r.timed_iters}, {"threads", r.threads}};
    experiments::write_text(fs::path(f.out_dir) / "fps.json", j.dump(2) + "\n");
  }
  return 0;
}

int cmd_plot(const CommonFlags& f, int samples) {
  const fs::path out = require_out(f);
  std::optional<experiments::TrainLog> log;
  std::optional<std::vector<metrics::MetricsReport>> reports;
  if (fs::exists(out / "train_log.txt")) log = experiments::TrainLog::parse(experiments::read_text(out / "train_log.txt"));
  if (fs::exists(out / "metrics.txt")) reports = metrics::parse_records(experiments::read_text(out / "metrics.txt"));
  std::vector<ClipSample> clips;
  std::vector<Tensor> probs;
  if (!f.checkpoint.empty() && samples > 0) {
    auto loaded = require_model(f);
    ExperimentConfig c = resolve_config(f);
    const auto splits = resolve_data(f, c);
    auto all = experiments::enumerate_clips(pick_split(splits, f.split), loaded.config.clip_length);
    const std::size_t step = std::max<std::size_t>(1, all.size() / static_cast<std::size_t>(samples));
    for (std::size_t i = 0; i < all.size() && clips.size() < static_cast<std::size_t>(samples); i += step)
      clips.push_back(all[i]);
    const SpeckleConfig noise =
        f.noise_looks.empty() ? SpeckleConfig::clean() : SpeckleConfig::with_look(f.noise_looks.front(), c.eval_noise.seed);
    probs = experiments::predict_targets(*loaded.model, clips, noise, loaded.config.input_size);
  }
  const auto files = plots::emit_plots(out / "plots", log ? &*log : nullptr, reports ? &*reports : nullptr,
                                       clips.empty() ? nullptr : &clips, clips.empty() ? nullptr : &probs);
  for (const auto& p : files.written) std::cout << p.string() << '\n';
  if (files.written.empty()) std::cout << "nothing to plot in " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dsanet: noise-robust ultrasound video segmentation"};
  app.require_subcommand(1);
  CommonFlags flags;
  int warmup = 2, iters = 10, samples = 4;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* train = app.add_subcommand("train", "Train one variant");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate all variants under clean and speckled inputs");
  auto* sweep = app.add_subcommand("noise-sweep", "Evaluate a checkpoint over several look numbers");
  auto* bench = app.add_subcommand("bench-fps", "Measure single-stream inference throughput");
  auto* plot = app.add_subcommand("plot", "Render loss curves, metric charts and overlays");
  for (auto* cmd : {synth, train, eval, ablate, sweep, bench, plot}) add_common(cmd, flags);
  for (auto* cmd : {eval, sweep, plot})
    cmd->add_option("--split", flags.split, "Split to evaluate")->check(CLI::IsMember({"train", "val", "test"}));
  bench->add_option("--warmup", warmup, "Untimed iterations")->check(CLI::PositiveNumber);
  bench->add_option("--iters", iters, "Timed iterations (>= 10)")->check(CLI::Range(10, 1000000));
  plot->add_option("--samples", samples, "Overlay panels to render")->check(CLI::NonNegativeNumber);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*synth) return cmd_synth(flags);
    if (*train) return cmd_train(flags);
    if (*eval) return cmd_eval(flags);
    if (*ablate) return cmd_ablate(flags);
    if (*sweep) return cmd_noise_sweep(flags);
    if (*bench) return cmd_bench(flags, warmup, iters);
    if (*plot) return cmd_plot(flags, samples);
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
