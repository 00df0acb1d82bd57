#include "dsanet/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "dsanet/errors.hpp"

namespace dsanet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double to_double(const std::string& key, const std::string& s) {
  if (s == "inf" || s == "clean") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError(key + ": not a number: '" + s + "'");
  return v;
}

long long to_int(const std::string& key, const std::string& s) {
  long long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError(key + ": not an integer: '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError(key + ": not an unsigned integer: '" + s + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": not a boolean: '" + s + "'");
}

struct Field {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
  bool model = false;  // part of the checkpoint header
};

Field int_field(const std::string& key, int& ref, bool model = false) {
  return {key, [&ref] { return std::to_string(ref); },
          [&ref, key](const std::string& s) { ref = static_cast<int>(to_int(key, s)); }, model};
}
Field u64_field(const std::string& key, std::uint64_t& ref, bool model = false) {
  return {key, [&ref] { return std::to_string(ref); }, [&ref, key](const std::string& s) { ref = to_u64(key, s); },
          model};
}
Field double_field(const std::string& key, double& ref, bool model = false) {
  return {key, [&ref] { return fmt(ref); }, [&ref, key](const std::string& s) { ref = to_double(key, s); }, model};
}
Field bool_field(const std::string& key, bool& ref, bool model = false) {
  return {key, [&ref] { return std::string(ref ? "true" : "false"); },
          [&ref, key](const std::string& s) { ref = to_bool(key, s); }, model};
}

std::vector<Field> fields(ExperimentConfig& c) {
  std::vector<Field> f;
  f.push_back({"experiment.variant", [&c] { return to_string(c.variant); },
               [&c](const std::string& s) { c.variant = parse_variant(s); }, true});
  f.push_back(int_field("experiment.epochs", c.epochs));
  f.push_back(int_field("experiment.batch_size", c.batch_size));
  f.push_back(double_field("experiment.learning_rate", c.learning_rate));
  f.push_back(double_field("experiment.weight_decay", c.weight_decay));
  f.push_back(int_field("experiment.clip_length", c.clip_length, true));
  f.push_back(int_field("experiment.input_size", c.input_size, true));
  f.push_back(u64_field("experiment.seed", c.seed));
  f.push_back(int_field("experiment.max_steps", c.max_steps));
  f.push_back(double_field("experiment.flip_probability", c.flip_probability));
  f.push_back(bool_field("experiment.vertical_flip", c.vertical_flip));

  f.push_back(double_field("noise.eval_look", c.eval_noise.look));
  f.push_back(u64_field("noise.eval_seed", c.eval_noise.seed));
  f.push_back(bool_field("noise.clip_output", c.eval_noise.clip_output));
  f.push_back(bool_field("noise.train_noise", c.train_noise));
  f.push_back(double_field("noise.train_look", c.train_noise_look));

  f.push_back(int_field("model.stem_channels", c.backbone.stem_channels, true));
  for (int i = 0; i < 4; ++i)
    f.push_back(int_field("model.stage" + std::to_string(i + 1) + "_channels", c.backbone.stage_channels[i], true));
  f.push_back(int_field("model.fusion_channels", c.backbone.fusion_channels, true));
  f.push_back(u64_field("model.init_seed", c.backbone.parameter_init_seed, true));
  f.push_back({"model.similarity_mode",
               [&c] {
                 return std::string(c.afsa.mode == afsa::SimilarityMode::kPerChannelCosine ? "per_channel_cosine"
                                                                                           : "elementwise_literal");
               },
               [&c](const std::string& s) {
                 if (s == "per_channel_cosine") c.afsa.mode = afsa::SimilarityMode::kPerChannelCosine;
                 else if (s == "elementwise_literal") c.afsa.mode = afsa::SimilarityMode::kElementwiseLiteral;
                 else throw ConfigError("model.similarity_mode: expected per_channel_cosine or elementwise_literal");
               },
               true});
  f.push_back(double_field("model.similarity_eps", c.afsa.eps, true));
  f.push_back({"model.aux_path",
               [&c] { return std::string(c.aux_path == AuxPath::kLightweightHead ? "lightweight_head" : "full_path"); },
               [&c](const std::string& s) {
                 if (s == "lightweight_head") c.aux_path = AuxPath::kLightweightHead;
                 else if (s == "full_path") c.aux_path = AuxPath::kFullPath;
                 else throw ConfigError("model.aux_path: expected lightweight_head or full_path");
               },
               true});
  f.push_back(int_field("attention.num_layers", c.attention.num_layers, true));
  f.push_back(int_field("attention.projection_dim", c.attention.projection_dim, true));
  f.push_back(bool_field("attention.use_residual", c.attention.use_residual, true));

  f.push_back(int_field("loss.kernel_size", c.loss.kernel_size));
  f.push_back(double_field("loss.lambda", c.loss.lambda));
  f.push_back(double_field("loss.dice_eps", c.loss.dice_eps));
  f.push_back(double_field("loss.prob_clamp", c.loss.prob_clamp));
  f.push_back(bool_field("metrics.mae_binarized", c.mae_binarized));

  f.push_back(int_field("synth.num_videos", c.synth.num_videos));
  f.push_back(int_field("synth.test_videos", c.synth_test_videos));
  f.push_back(int_field("synth.val_videos", c.synth_val_videos));
  f.push_back(int_field("synth.frames_per_video", c.synth.frames_per_video));
  f.push_back(int_field("synth.image_size", c.synth.image_size));
  f.push_back(int_field("synth.lesion_count_min", c.synth.lesion_count_min));
  f.push_back(int_field("synth.lesion_count_max", c.synth.lesion_count_max));
  f.push_back(double_field("synth.lesion_speed", c.synth.lesion_speed));
  f.push_back(double_field("synth.lesion_deform_rate", c.synth.lesion_deform_rate));
  f.push_back(double_field("synth.lesion_scale_min", c.synth.lesion_scale_min));
  f.push_back(double_field("synth.lesion_scale_max", c.synth.lesion_scale_max));
  f.push_back(double_field("synth.background_texture_scale", c.synth.background_texture_scale));
  f.push_back(double_field("synth.tissue_look", c.synth.tissue_look));
  f.push_back(u64_field("synth.master_seed", c.synth.master_seed));
  return f;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
  ConfigFile file;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    file.set(key, trim(line.substr(eq + 1)));
  }
  return file;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void ConfigFile::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_)
    if (k == key) {
      v = value;
      return;
    }
  entries_.emplace_back(key, value);
}

bool ConfigFile::has(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return true;
  return false;
}

std::string ConfigFile::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw ConfigError("missing config key " + key);
}

std::string ConfigFile::to_text() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, value] : entries_) {
    const auto dot = key.find('.');
    const std::string s = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string k = dot == std::string::npos ? key : key.substr(dot + 1);
    if (s != section) {
      if (!section.empty()) out << '\n';
      out << '[' << s << "]\n";
      section = s;
    }
    out << k << '=' << value << '\n';
  }
  return out.str();
}

Profile parse_profile(const std::string& name) {
  if (name == "desk") return Profile::kDesk;
  if (name == "paper") return Profile::kPaper;
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

ExperimentConfig ExperimentConfig::for_profile(Profile profile) {
  ExperimentConfig c;
  if (profile == Profile::kPaper) {
    c.input_size = 352;
    c.epochs = 15;
    c.synth.image_size = 352;
    return c;
  }
  c.input_size = 64;
  c.epochs = 5;
  c.learning_rate = 1e-3;
  c.synth.image_size = 64;
  c.synth.num_videos = 8;
  c.synth.frames_per_video = 12;
  return c;
}

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig m;
  m.variant = variant;
  m.backbone = backbone;
  m.attention = attention;
  m.afsa = afsa;
  m.aux_path = aux_path;
  m.clip_length = clip_length;
  return m;
}

void ExperimentConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (clip_length != 3) throw ConfigError("clip_length must be 3 (the loss supervises exactly three frames)");
  if (input_size < 32 || input_size % 32 != 0) throw ConfigError("input_size must be a positive multiple of 32");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) throw ConfigError("flip_probability must lie in [0, 1]");
  eval_noise.validate();
  if (!(train_noise_look > 0.0)) throw ConfigError("noise.train_look must be > 0");
  backbone.validate();
  attention.validate();
  if (loss.kernel_size < 1 || loss.kernel_size % 2 == 0) throw ConfigError("loss.kernel_size must be odd");
}

void apply_config(ExperimentConfig& config, const ConfigFile& file) {
  auto table = fields(config);
  for (const auto& [key, value] : file.entries()) {
    bool found = false;
    for (Field& f : table)
      if (f.key == key) {
        f.set(value);
        found = true;
        break;
      }
    if (!found) throw ConfigError("unknown config key '" + key + "'");
  }
}

ConfigFile to_config_file(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  ConfigFile file;
  for (const Field& f : fields(copy)) file.set(f.key, f.get());
  return file;
}

std::vector<std::pair<std::string, std::string>> model_header(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  std::vector<std::pair<std::string, std::string>> header;
  for (const Field& f : fields(copy))
    if (f.model) header.emplace_back(f.key, f.get());
  return header;
}

ExperimentConfig config_from_header(const std::vector<std::pair<std::string, std::string>>& header) {
  ExperimentConfig c = ExperimentConfig::for_profile(Profile::kDesk);
  auto table = fields(c);
  for (const auto& [key, value] : header) {
    bool found = false;
    for (Field& f : table)
      if (f.key == key && f.model) {
        f.set(value);
        found = true;
      }
    if (!found) throw VersionError("checkpoint header key '" + key + "' is not understood by this version");
  }
  return c;
}

int compute_threads() {
  const char* env = std::getenv("DSANET_THREADS");
  if (!env || !*env) return 1;
  try {
    const int n = std::stoi(env);
    return n < 1 ? 1 : n;
  } catch (const std::exception&) {
    throw ConfigError(std::string("DSANET_THREADS must be a positive integer, got '") + env + "'");
  }
}

}  // namespace dsanet
