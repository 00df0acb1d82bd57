#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dsanet/config.hpp"
#include "dsanet/metrics.hpp"
#include "dsanet/model.hpp"
#include "dsanet/objectives.hpp"
#include "dsanet/speckle.hpp"
#include "dsanet/synth_data.hpp"

namespace dsanet::experiments {

// Seed streams derived from ExperimentConfig::seed.
enum class SeedStream : std::uint64_t { kInit = 1, kShuffle = 2, kFlip = 3, kTrainNoise = 4, kEvalNoise = 5 };
std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream);

struct Splits {
  std::vector<VideoRecord> train, val, test;
};

// Three disjoint synthetic splits; val and test use master seeds derived from
// the train master seed so no video is shared.
Splits make_synthetic_splits(const ExperimentConfig& config);
Splits load_splits(const std::filesystem::path& root);
void save_splits(const Splits& splits, const std::filesystem::path& root);

// Every (video, target) clip of the given videos, in video then frame order.
std::vector<ClipSample> enumerate_clips(const std::vector<VideoRecord>& videos, int clip_length);

struct StepRecord {
  long step = 0;  // 1-based optimizer step
  int epoch = 0;
  double loss = 0.0;  // mean total loss over the batch
  double dice = 0.0, wbce = 0.0, wiou = 0.0;  // batch means summed over frames
  bool operator==(const StepRecord&) const = default;
};

struct EpochRecord {
  int epoch = 0;
  double val_dice = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  std::string to_text() const;
  static TrainLog parse(const std::string& text);
  bool operator==(const TrainLog&) const = default;
};

// Key=value lines describing a run: config, derived seeds, graph wiring.
struct RunManifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void add(const std::string& key, const std::string& value) { entries.emplace_back(key, value); }
  std::string value(const std::string& key) const;  // LookupError if absent
  std::string to_text() const;
};

struct TrainOptions {
  std::filesystem::path out_dir;         // empty: keep everything in memory
  std::vector<ClipSample> validation;    // optional; drives best-val checkpointing
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  std::unique_ptr<DsaNet> model;
  ExperimentConfig config;  // effective config, including the derived init seed
  TrainLog log;
  RunManifest manifest;
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
};

// Builds the model the way train() does, without training it.
std::unique_ptr<DsaNet> build_model(const ExperimentConfig& config, ExperimentConfig* effective = nullptr);

// Adam over shuffled clips. Throws DivergenceError on a non-finite loss after
// saving the last parameters that gave a finite loss (when out_dir is set).
TrainResult train(const ExperimentConfig& config, const std::vector<ClipSample>& clips,
                  const TrainOptions& options = {});

struct EvalOptions {
  int input_size = 64;
  bool mae_binarized = false;
  int threads = 1;
  std::string variant_name;
};

// Target-frame metrics averaged over clips; noise touches inputs only.
// Clips are sharded over `threads` workers and reduced in clip order.
metrics::MetricsReport evaluate(const DsaNet& model, const std::vector<ClipSample>& clips,
                                const SpeckleConfig& noise, const EvalOptions& options);

// Per-clip target probabilities, for overlays.
std::vector<Tensor> predict_targets(const DsaNet& model, const std::vector<ClipSample>& clips,
                                    const SpeckleConfig& noise, int input_size);

struct LoadedModel {
  std::unique_ptr<DsaNet> model;
  ExperimentConfig config;
};

// Rebuilds the model from the checkpoint header. With `expected`, any
// difference in model-defining keys is a VersionError.
LoadedModel load_model(const std::filesystem::path& checkpoint, const ExperimentConfig* expected = nullptr);
std::vector<std::pair<std::string, std::string>> checkpoint_header(const ExperimentConfig& config);

struct AblationOptions {
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<double> looks{25.0, 20.0};
  std::filesystem::path out_dir;
  std::function<void(const std::string&)> progress;
};

struct AblationResult {
  std::vector<metrics::MetricsReport> per_seed;  // variant x seed x noise
  std::vector<metrics::MetricsReport> mean;      // variant x noise, averaged over seeds
  metrics::FormattedReport report;

  // Mean (clean Dice - Dice at the given tag) for a variant.
  double dice_drop(Variant variant, const std::string& tag) const;
};

AblationResult run_ablation(const ExperimentConfig& base, const std::vector<ClipSample>& train_clips,
                            const std::vector<ClipSample>& test_clips, const AblationOptions& options = {});

// Clean plus each look in `looks`, on one model.
std::vector<metrics::MetricsReport> noise_sweep(const DsaNet& model, const std::vector<ClipSample>& clips,
                                                const std::vector<double>& looks, std::uint64_t noise_seed,
                                                const EvalOptions& options);

// Full 3-frame inference on a fixed random clip at the configured size.
metrics::BenchmarkResult bench_fps(const DsaNet& model, int input_size, int warmup_iters, int timed_iters,
                                   int threads = 1);

RunManifest make_manifest(const ExperimentConfig& config);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace dsanet::experiments
