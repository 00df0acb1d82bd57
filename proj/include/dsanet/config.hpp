#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dsanet/model.hpp"
#include "dsanet/objectives.hpp"
#include "dsanet/speckle.hpp"
#include "dsanet/synth_data.hpp"

namespace dsanet {

// Flat key=value text with [section] headers; keys are stored as
// "section.key". Order is preserved so written files diff cleanly.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& origin = "<string>");
  static ConfigFile load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;  // ConfigError if absent
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

enum class Profile { kDesk, kPaper };

struct ExperimentConfig {
  Variant variant = Variant::kFull;
  int epochs = 15;
  int batch_size = 2;
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  int clip_length = 3;
  int input_size = 352;
  std::uint64_t seed = 0;
  int max_steps = 0;  // > 0 stops training early after that many optimizer steps
  double flip_probability = 0.5;
  bool vertical_flip = false;

  SpeckleConfig eval_noise;    // clean by default
  bool train_noise = false;    // inject speckle into training inputs too
  double train_noise_look = 25.0;
  bool mae_binarized = false;

  BackboneConfig backbone;
  lgsa::AttentionConfig attention;
  afsa::AfsaConfig afsa;
  AuxPath aux_path = AuxPath::kLightweightHead;
  objectives::LossParams loss;

  SynthConfig synth;         // used by `synth` and by in-memory runs
  int synth_test_videos = 4;
  int synth_val_videos = 2;

  static ExperimentConfig for_profile(Profile profile);
  ModelConfig model_config() const;
  void validate() const;
};

Profile parse_profile(const std::string& name);

// Overlays every key present in `file` onto `config`; unknown keys are errors.
void apply_config(ExperimentConfig& config, const ConfigFile& file);
ConfigFile to_config_file(const ExperimentConfig& config);

// Model-defining subset, stored in checkpoint headers.
std::vector<std::pair<std::string, std::string>> model_header(const ExperimentConfig& config);
ExperimentConfig config_from_header(const std::vector<std::pair<std::string, std::string>>& header);

// DSANET_THREADS, defaulting to 1.
int compute_threads();

}  // namespace dsanet
