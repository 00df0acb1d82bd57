#include "dsanet/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "dsanet/autograd.hpp"
#include "dsanet/checkpoint.hpp"
#include "dsanet/errors.hpp"
#include "dsanet/ops.hpp"
#include "dsanet/optimizer.hpp"
#include "dsanet/rng.hpp"

namespace dsanet::experiments {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("not a number in log: '" + s + "'");
  return v;
}

std::map<std::string, std::string> split_fields(const std::string& line) {
  std::map<std::string, std::string> out;
  std::istringstream in(line);
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed log field '" + token + "'");
    out[token.substr(0, eq)] = token.substr(eq + 1);
  }
  return out;
}

Var as_map(const Var& logits) {
  return ops::reshape(ops::sigmoid(logits), {logits.dim(-2), logits.dim(-1)});
}

std::vector<Tensor> snapshot(const ParameterStore& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& [name, v] : params.entries()) out.push_back(v.value());
  return out;
}

void restore(ParameterStore& params, const std::vector<Tensor>& values) {
  std::size_t i = 0;
  for (const auto& [name, handle] : params.entries()) {
    Var v = handle;
    v.mutable_value() = values[i++];
  }
}

ClipSample prepare_input(const ClipSample& clip, const SpeckleConfig& noise, int input_size) {
  return apply_speckle_clip(resize_and_normalize(clip, input_size), noise);
}

struct ClipScore {
  double mae = 0.0, iou = 0.0, dice = 0.0;
};

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream));
}

Splits make_synthetic_splits(const ExperimentConfig& config) {
  Splits s;
  SynthConfig train = config.synth;
  s.train = generate_dataset(train);
  SynthConfig val = train;
  val.num_videos = config.synth_val_videos;
  val.master_seed = derive_seed(train.master_seed, 0x7661'6c00ULL);
  if (val.num_videos > 0) s.val = generate_dataset(val);
  SynthConfig test = train;
  test.num_videos = config.synth_test_videos;
  test.master_seed = derive_seed(train.master_seed, 0x7465'7374ULL);
  if (test.num_videos > 0) s.test = generate_dataset(test);
  return s;
}

Splits load_splits(const fs::path& root) {
  Splits s;
  s.train = load_dataset(root, "train").videos;
  if (fs::exists(root / "val")) s.val = load_dataset(root, "val").videos;
  if (fs::exists(root / "test")) s.test = load_dataset(root, "test").videos;
  return s;
}

void save_splits(const Splits& splits, const fs::path& root) {
  save_dataset(splits.train, root, "train");
  if (!splits.val.empty()) save_dataset(splits.val, root, "val");
  if (!splits.test.empty()) save_dataset(splits.test, root, "test");
}

std::vector<ClipSample> enumerate_clips(const std::vector<VideoRecord>& videos, int clip_length) {
  std::vector<ClipSample> clips;
  for (const VideoRecord& v : videos)
    for (int t = 0; t < v.frame_count(); ++t) clips.push_back(sample_clip(v, t, clip_length));
  return clips;
}

std::string TrainLog::to_text() const {
  std::ostringstream out;
  for (const StepRecord& s : steps) {
    out << "step=" << s.step << " epoch=" << s.epoch << " loss=" << fmt(s.loss) << " dice=" << fmt(s.dice)
        << " wbce=" << fmt(s.wbce) << " wiou=" << fmt(s.wiou) << '\n';
  }
  for (const EpochRecord& e : epochs) out << "epoch=" << e.epoch << " val_dice=" << fmt(e.val_dice) << '\n';
  return out.str();
}

TrainLog TrainLog::parse(const std::string& text) {
  TrainLog log;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_fields(line);
    try {
      if (f.count("step")) {
        StepRecord s;
        s.step = std::stol(f.at("step"));
        s.epoch = std::stoi(f.at("epoch"));
        s.loss = parse_double(f.at("loss"));
        s.dice = parse_double(f.at("dice"));
        s.wbce = parse_double(f.at("wbce"));
        s.wiou = parse_double(f.at("wiou"));
        log.steps.push_back(s);
      } else {
        log.epochs.push_back({std::stoi(f.at("epoch")), parse_double(f.at("val_dice"))});
      }
    } catch (const std::out_of_range&) {
      throw ConfigError("training log line is missing a field: " + line);
    }
  }
  return log;
}

std::string RunManifest::value(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  throw LookupError("manifest has no key " + key);
}

std::string RunManifest::to_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
  return out.str();
}

RunManifest make_manifest(const ExperimentConfig& config) {
  RunManifest m;
  m.add("run.variant", to_string(config.variant));
  m.add("run.seed", std::to_string(config.seed));
  m.add("seed.init", std::to_string(stream_seed(config.seed, SeedStream::kInit)));
  m.add("seed.shuffle", std::to_string(stream_seed(config.seed, SeedStream::kShuffle)));
  m.add("seed.flip", std::to_string(stream_seed(config.seed, SeedStream::kFlip)));
  m.add("seed.train_noise", std::to_string(stream_seed(config.seed, SeedStream::kTrainNoise)));
  m.add("seed.eval_noise", std::to_string(config.eval_noise.seed));
  m.add("seed.synth_master", std::to_string(config.synth.master_seed));
  VariantGraph graph = VariantGraph::of(config.variant);
  m.add("graph", graph.describe());
  m.add("graph.baseline", "encoder_decoder + 1x1 head on the upsampled decoder pyramid");
  m.add("graph.aux_path", config.aux_path == AuxPath::kLightweightHead ? "lightweight_head" : "full_path");
  m.add("threads", std::to_string(compute_threads()));
  const ConfigFile file = to_config_file(config);
  for (const auto& [k, v] : file.entries()) m.add("config." + k, v);
  return m;
}

std::vector<std::pair<std::string, std::string>> checkpoint_header(const ExperimentConfig& config) {
  return model_header(config);
}

std::unique_ptr<DsaNet> build_model(const ExperimentConfig& config, ExperimentConfig* effective) {
  ExperimentConfig c = config;
  c.backbone.parameter_init_seed = stream_seed(config.seed, SeedStream::kInit);
  auto model = std::make_unique<DsaNet>(c.model_config());
  if (effective) *effective = c;
  return model;
}

TrainResult train(const ExperimentConfig& config, const std::vector<ClipSample>& clips, const TrainOptions& options) {
  config.validate();
  if (clips.empty()) throw ConfigError("train: no training clips");
  TrainResult result;
  result.model = build_model(config, &result.config);
  result.manifest = make_manifest(result.config);
  DsaNet& model = *result.model;
  ParameterStore& params = model.params();
  const auto header = checkpoint_header(result.config);

  const bool persist = !options.out_dir.empty();
  if (persist) {
    fs::create_directories(options.out_dir);
    write_text(options.out_dir / "config.txt", to_config_file(result.config).to_text());
    write_text(options.out_dir / "manifest.txt", result.manifest.to_text());
  }

  Adam adam(params, {config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  const std::uint64_t shuffle_seed = stream_seed(config.seed, SeedStream::kShuffle);
  const std::uint64_t flip_seed = stream_seed(config.seed, SeedStream::kFlip);
  const std::uint64_t noise_seed = stream_seed(config.seed, SeedStream::kTrainNoise);
  const int n = static_cast<int>(clips.size());
  const int batch = config.batch_size;
  std::vector<Tensor> last_good = snapshot(params);
  double best_val = -1.0;
  long step = 0;
  std::uint64_t sample_counter = 0;

  auto save_final = [&](const fs::path& name) {
    if (!persist) return fs::path();
    const fs::path path = options.out_dir / name;
    save_checkpoint(path, params, header);
    return path;
  };

  bool done = false;
  for (int epoch = 0; epoch < config.epochs && !done; ++epoch) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(shuffle_seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (int begin = 0; begin < n; begin += batch) {
      if (config.max_steps > 0 && step >= config.max_steps) {
        done = true;
        break;
      }
      const int end = std::min(n, begin + batch);
      const double inv = 1.0 / static_cast<double>(end - begin);
      std::vector<Tensor> candidate = snapshot(params);
      adam.zero_grad();
      StepRecord rec;
      rec.step = step + 1;
      rec.epoch = epoch;
      for (int j = begin; j < end; ++j) {
        const std::uint64_t sample = sample_counter++;
        ClipSample clip = resize_and_normalize(clips[order[j]], config.input_size);
        clip = augment_flip(clip, config.flip_probability, derive_seed(flip_seed, sample), config.vertical_flip);
        if (config.train_noise)
          clip = apply_speckle_clip(clip, SpeckleConfig::with_look(config.train_noise_look, derive_seed(noise_seed, sample)));

        ClipOutput out = model.forward(clip.frames);
        std::vector<Var> probs;
        for (const Var& l : out.logits) probs.push_back(as_map(l));
        objectives::LossResult loss = objectives::total_loss(probs, clip.masks, config.loss);
        if (!std::isfinite(loss.breakdown.total)) {
          restore(params, last_good);
          fs::path saved = save_final("last_good.ckpt");
          throw DivergenceError("non-finite loss at step " + std::to_string(step + 1) +
                                (persist ? "; last good parameters saved to " + saved.string() : std::string()));
        }
        backward(ops::scale(loss.total, inv));
        rec.loss += loss.breakdown.total * inv;
        for (const auto& f : loss.breakdown.per_frame) {
          rec.dice += f.dice * inv;
          rec.wbce += f.wbce * inv;
          rec.wiou += f.wiou * inv;
        }
      }
      last_good = std::move(candidate);
      adam.step();
      ++step;
      result.log.steps.push_back(rec);
      if (options.on_step) options.on_step(rec);
    }

    if (!options.validation.empty()) {
      EvalOptions eo;
      eo.input_size = config.input_size;
      eo.threads = 1;
      const auto report = evaluate(model, options.validation, SpeckleConfig::clean(), eo);
      result.log.epochs.push_back({epoch, report.dice});
      if (report.dice > best_val) {
        best_val = report.dice;
        result.best_checkpoint = save_final("best.ckpt");
      }
    }
  }

  result.final_checkpoint = save_final("final.ckpt");
  if (persist) write_text(options.out_dir / "train_log.txt", result.log.to_text());
  return result;
}

std::vector<Tensor> predict_targets(const DsaNet& model, const std::vector<ClipSample>& clips,
                                    const SpeckleConfig& noise, int input_size) {
  NoGradGuard guard;
  std::vector<Tensor> out;
  for (const ClipSample& clip : clips) {
    const ClipSample in = prepare_input(clip, noise, input_size);
    out.push_back(as_map(model.forward_target(in.frames)).value());
  }
  return out;
}

metrics::MetricsReport evaluate(const DsaNet& model, const std::vector<ClipSample>& clips, const SpeckleConfig& noise,
                                const EvalOptions& options) {
  noise.validate();
  const int n = static_cast<int>(clips.size());
  std::vector<ClipScore> scores(n);
  auto work = [&](int worker, int workers) {
    NoGradGuard guard;
    for (int i = worker; i < n; i += workers) {
      const ClipSample in = prepare_input(clips[i], noise, options.input_size);
      const Tensor prob = as_map(model.forward_target(in.frames)).value();
      const Tensor& gt = in.masks.back();
      ClipScore& s = scores[i];
      s.mae = metrics::mae(prob, gt, options.mae_binarized);
      std::tie(s.iou, s.dice) = metrics::iou_dice(prob, gt);
    }
  };
  const int threads = std::clamp(options.threads, 1, std::max(1, n));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    for (auto& t : pool) t.join();
  }

  metrics::MetricsReport report;
  report.variant = options.variant_name.empty() ? to_string(model.config().variant) : options.variant_name;
  report.noise_tag = noise_tag(noise);
  report.n_frames = n;
  report.threads = threads;
  for (const ClipScore& s : scores) {
    report.mae += s.mae;
    report.iou += s.iou;
    report.dice += s.dice;
  }
  if (n > 0) {
    report.mae /= n;
    report.iou /= n;
    report.dice /= n;
  }
  return report;
}

LoadedModel load_model(const fs::path& checkpoint, const ExperimentConfig* expected) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  LoadedModel loaded;
  loaded.config = config_from_header(ck.header);
  if (expected) {
    for (const auto& [key, value] : model_header(*expected)) {
      if (key == "model.init_seed") continue;
      const std::string stored = ck.header_value(key, "<absent>");
      if (stored != value) {
        throw VersionError("checkpoint " + checkpoint.string() + " was built with " + key + "=" + stored +
                           " but the config requests " + value);
      }
    }
  }
  loaded.model = std::make_unique<DsaNet>(loaded.config.model_config());
  restore_parameters(loaded.model->params(), ck);
  return loaded;
}

double AblationResult::dice_drop(Variant variant, const std::string& tag) const {
  const std::string name = to_string(variant);
  double clean = NAN, noisy = NAN;
  for (const auto& r : mean) {
    if (r.variant != name) continue;
    if (r.noise_tag == "clean") clean = r.dice;
    if (r.noise_tag == tag) noisy = r.dice;
  }
  if (std::isnan(clean) || std::isnan(noisy)) throw LookupError("no ablation rows for " + name + " / " + tag);
  return clean - noisy;
}

AblationResult run_ablation(const ExperimentConfig& base, const std::vector<ClipSample>& train_clips,
                            const std::vector<ClipSample>& test_clips, const AblationOptions& options) {
  if (options.seeds.empty()) throw ConfigError("run_ablation: no seeds");
  AblationResult result;
  EvalOptions eo;
  eo.input_size = base.input_size;
  eo.mae_binarized = base.mae_binarized;
  eo.threads = compute_threads();

  for (Variant v : kAllVariants) {
    std::vector<metrics::MetricsReport> sums;
    for (std::uint64_t seed : options.seeds) {
      ExperimentConfig cfg = base;
      cfg.variant = v;
      cfg.seed = seed;
      TrainOptions to;
      if (!options.out_dir.empty()) to.out_dir = options.out_dir / to_string(v) / ("seed_" + std::to_string(seed));
      if (options.progress) options.progress("training " + to_string(v) + " seed " + std::to_string(seed));
      TrainResult trained = train(cfg, train_clips, to);

      std::vector<SpeckleConfig> conditions{SpeckleConfig::clean()};
      for (double look : options.looks)
        conditions.push_back(SpeckleConfig::with_look(look, stream_seed(seed, SeedStream::kEvalNoise)));
      for (std::size_t k = 0; k < conditions.size(); ++k) {
        const auto report = evaluate(*trained.model, test_clips, conditions[k], eo);
        result.per_seed.push_back(report);
        if (sums.size() <= k) {
          sums.push_back(report);
        } else {
          sums[k].mae += report.mae;
          sums[k].iou += report.iou;
          sums[k].dice += report.dice;
        }
      }
    }
    const double count = static_cast<double>(options.seeds.size());
    for (auto& r : sums) {
      r.mae /= count;
      r.iou /= count;
      r.dice /= count;
      result.mean.push_back(r);
    }
  }
  result.report = metrics::format_report(result.mean, metrics::Layout::kGrouped);
  if (!options.out_dir.empty()) {
    write_text(options.out_dir / "ablation_table.txt", result.report.table);
    write_text(options.out_dir / "metrics.txt", result.report.records);
    std::string per_seed;
    for (const auto& r : result.per_seed) per_seed += metrics::format_record(r) + "\n";
    write_text(options.out_dir / "metrics_per_seed.txt", per_seed);
  }
  return result;
}

std::vector<metrics::MetricsReport> noise_sweep(const DsaNet& model, const std::vector<ClipSample>& clips,
                                                const std::vector<double>& looks, std::uint64_t noise_seed,
                                                const EvalOptions& options) {
  std::vector<metrics::MetricsReport> reports{evaluate(model, clips, SpeckleConfig::clean(), options)};
  for (double look : looks) reports.push_back(evaluate(model, clips, SpeckleConfig::with_look(look, noise_seed), options));
  return reports;
}

metrics::BenchmarkResult bench_fps(const DsaNet& model, int input_size, int warmup_iters, int timed_iters,
                                   int threads) {
  Rng rng(0);
  std::vector<Image> frames;
  for (int t = 0; t < model.config().clip_length; ++t) {
    Image f({input_size, input_size});
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = uniform01(rng);
    frames.push_back(std::move(f));
  }
  auto once = [&] {
    NoGradGuard guard;
    Var out = model.forward_target(frames);
    (void)out;
  };
  return metrics::benchmark_fps(once, warmup_iters, timed_iters, threads);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace dsanet::experiments
