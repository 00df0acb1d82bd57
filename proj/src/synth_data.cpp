#include "dsanet/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dsanet/errors.hpp"
#include "dsanet/image_io.hpp"
#include "dsanet/rng.hpp"

namespace dsanet {

namespace fs = std::filesystem;

void VideoRecord::validate() const {
  if (frames.empty()) throw ShapeError("video " + video_id + " has no frames");
  if (frames.size() != masks.size()) throw ShapeError("video " + video_id + ": frame/mask count mismatch");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].rank() != 2 || frames[i].shape() != frames[0].shape() || masks[i].shape() != frames[0].shape()) {
      throw ShapeError("video " + video_id + ": inconsistent spatial size at frame " + std::to_string(i));
    }
    for (double v : frames[i].values())
      if (!(v >= 0.0 && v <= 1.0)) throw ShapeError("video " + video_id + ": frame value outside [0,1]");
    for (double v : masks[i].values())
      if (v != 0.0 && v != 1.0) throw ShapeError("video " + video_id + ": non-binary mask value");
  }
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw ConfigError(field + ": " + why); };
  if (num_videos < 1) fail("num_videos", "must be >= 1");
  if (frames_per_video < 1) fail("frames_per_video", "must be >= 1");
  if (image_size < 32) fail("image_size", "must be >= 32");
  if (image_size % 32 != 0) fail("image_size", std::to_string(image_size) + " not divisible by 32");
  if (lesion_count_min < 1) fail("lesion_count_range", "min must be >= 1");
  if (lesion_count_max < lesion_count_min) fail("lesion_count_range", "max must be >= min");
  if (!(lesion_speed >= 0.0)) fail("lesion_speed", "must be >= 0");
  if (!(lesion_deform_rate >= 0.0)) fail("lesion_deform_rate", "must be >= 0");
  if (!(lesion_scale_min > 0.0) || !(lesion_scale_max >= lesion_scale_min) || lesion_scale_max > 0.35) {
    fail("lesion_scale", "need 0 < min <= max <= 0.35");
  }
  if (!(background_texture_scale >= 1.0)) fail("background_texture_scale", "must be >= 1");
  if (!(tissue_look > 0.0)) fail("tissue_look", "must be > 0");
}

namespace {

struct Lesion {
  double cx, cy, vx, vy;
  double a0, b0, angle, spin;
  double phase_a, phase_b;
  double contrast;
};

// Smooth random field in [-1, 1]: a coarse uniform grid upsampled bilinearly.
Image smooth_field(int size, double scale, Rng& rng) {
  const int grid = static_cast<int>(std::ceil(size / scale)) + 2;
  Image coarse(Shape{grid, grid});
  for (double& v : coarse.values()) v = uniform(rng, -1.0, 1.0);
  Image field(Shape{size, size});
  for (int y = 0; y < size; ++y) {
    const double gy = y / scale;
    const int y0 = static_cast<int>(gy);
    const double fy = gy - y0;
    for (int x = 0; x < size; ++x) {
      const double gx = x / scale;
      const int x0 = static_cast<int>(gx);
      const double fx = gx - x0;
      const double top = coarse.at(y0, x0) * (1 - fx) + coarse.at(y0, x0 + 1) * fx;
      const double bot = coarse.at(y0 + 1, x0) * (1 - fx) + coarse.at(y0 + 1, x0 + 1) * fx;
      field.at(y, x) = top * (1 - fy) + bot * fy;
    }
  }
  return field;
}

std::string video_name(int index) {
  std::ostringstream s;
  s << "video_";
  s.width(4);
  s.fill('0');
  s << index;
  return s.str();
}

std::string frame_name(int index) {
  std::ostringstream s;
  s.width(4);
  s.fill('0');
  s << index;
  s << ".pgm";
  return s.str();
}

}  // namespace

VideoRecord generate_video(const SynthConfig& config, int video_index) {
  config.validate();
  const int size = config.image_size;
  VideoRecord video;
  video.video_id = video_name(video_index);
  video.seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(video_index));
  Rng rng(video.seed);

  const Image texture = smooth_field(size, config.background_texture_scale, rng);
  const double background_level = uniform(rng, 0.58, 0.68);

  const int count = std::uniform_int_distribution<int>(config.lesion_count_min, config.lesion_count_max)(rng);
  constexpr double kDeformAmplitude = 0.15;
  std::vector<Lesion> lesions;
  for (int i = 0; i < count; ++i) {
    Lesion l{};
    l.a0 = uniform(rng, config.lesion_scale_min, config.lesion_scale_max) * size;
    l.b0 = uniform(rng, config.lesion_scale_min, config.lesion_scale_max) * size;
    const double margin = std::max(l.a0, l.b0) * (1 + kDeformAmplitude) + 2.0;
    l.cx = uniform(rng, margin, size - margin);
    l.cy = uniform(rng, margin, size - margin);
    const double heading = uniform(rng, 0.0, 2 * std::numbers::pi);
    l.vx = config.lesion_speed * std::cos(heading);
    l.vy = config.lesion_speed * std::sin(heading);
    l.angle = uniform(rng, 0.0, std::numbers::pi);
    l.spin = uniform(rng, -0.03, 0.03);
    l.phase_a = uniform(rng, 0.0, 2 * std::numbers::pi);
    l.phase_b = uniform(rng, 0.0, 2 * std::numbers::pi);
    l.contrast = uniform(rng, 0.50, 0.65);
    lesions.push_back(l);
  }
  // Axis oscillation a(t) = a0 (1 + A sin(w t + phi)) changes by at most A*w per frame.
  const double omega = config.lesion_deform_rate / kDeformAmplitude;

  std::gamma_distribution<double> tissue_speckle(config.tissue_look, 1.0 / config.tissue_look);
  for (int t = 0; t < config.frames_per_video; ++t) {
    Image frame(Shape{size, size});
    Image mask(Shape{size, size});
    Image lesion_weight(Shape{size, size});
    for (const Lesion& l : lesions) {
      const double a = l.a0 * (1 + kDeformAmplitude * std::sin(omega * t + l.phase_a));
      const double b = l.b0 * (1 + kDeformAmplitude * std::sin(omega * t + l.phase_b));
      const double ca = std::cos(l.angle + l.spin * t), sa = std::sin(l.angle + l.spin * t);
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const double dx = x + 0.5 - l.cx, dy = y + 0.5 - l.cy;
          const double u = (dx * ca + dy * sa) / a, v = (-dx * sa + dy * ca) / b;
          const double r = std::sqrt(u * u + v * v);
          if (r <= 1.0) mask.at(y, x) = 1.0;
          // Roughly one-pixel soft rim around the boundary.
          const double w = std::clamp(0.5 + (1.0 - r) * std::min(a, b), 0.0, 1.0);
          lesion_weight.at(y, x) = std::max(lesion_weight.at(y, x), w * l.contrast);
        }
    }
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const double tissue = background_level + 0.10 * texture.at(y, x);
        const double clean = tissue * (1.0 - lesion_weight.at(y, x));
        frame.at(y, x) = io::quantize16(clean * tissue_speckle(rng));
      }
    video.frames.push_back(std::move(frame));
    video.masks.push_back(std::move(mask));

    for (Lesion& l : lesions) {
      const double margin = std::max(l.a0, l.b0) * (1 + kDeformAmplitude) + 1.0;
      l.cx += l.vx;
      l.cy += l.vy;
      if (l.cx < margin || l.cx > size - margin) {
        l.vx = -l.vx;
        l.cx = std::clamp(l.cx, margin, size - margin);
      }
      if (l.cy < margin || l.cy > size - margin) {
        l.vy = -l.vy;
        l.cy = std::clamp(l.cy, margin, size - margin);
      }
    }
  }
  return video;
}

std::vector<VideoRecord> generate_dataset(const SynthConfig& config) {
  config.validate();
  std::vector<VideoRecord> videos;
  videos.reserve(config.num_videos);
  for (int v = 0; v < config.num_videos; ++v) videos.push_back(generate_video(config, v));
  return videos;
}

const VideoRecord& Dataset::find(const std::string& video_id) const {
  for (const VideoRecord& v : videos)
    if (v.video_id == video_id) return v;
  throw LookupError("unknown video_id '" + video_id + "' in split " + split);
}

std::size_t Dataset::total_frames() const {
  std::size_t n = 0;
  for (const VideoRecord& v : videos) n += v.frames.size();
  return n;
}

bool is_valid_split(const std::string& split) { return split == "train" || split == "val" || split == "test"; }

void save_dataset(const std::vector<VideoRecord>& records, const fs::path& root, const std::string& split) {
  if (!is_valid_split(split)) throw ConfigError("split must be train, val or test; got '" + split + "'");
  for (const VideoRecord& video : records) {
    video.validate();
    const fs::path dir = root / split / video.video_id;
    std::error_code ec;
    fs::create_directories(dir / "frames", ec);
    fs::create_directories(dir / "masks", ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    for (int i = 0; i < video.frame_count(); ++i) {
      io::write_pgm(dir / "frames" / frame_name(i), video.frames[i], 16);
      io::write_pgm(dir / "masks" / frame_name(i), video.masks[i], 8);
    }
    std::ofstream meta(dir / "meta");
    if (!meta) throw IoError("cannot write " + (dir / "meta").string());
    meta << "video_id=" << video.video_id << "\n"
         << "frame_count=" << video.frame_count() << "\n"
         << "height=" << video.frames[0].dim(0) << "\n"
         << "width=" << video.frames[0].dim(1) << "\n"
         << "seed=" << video.seed << "\n";
  }
}

namespace {

const char* kLayoutHelp =
    "expected layout: <root>/<split>/<video_id>/frames/NNNN.pgm, <root>/<split>/<video_id>/masks/NNNN.pgm, "
    "<root>/<split>/<video_id>/meta (key=value lines incl. frame_count)";

}  // namespace

Dataset load_dataset(const fs::path& root, const std::string& split) {
  if (!is_valid_split(split)) throw ConfigError("split must be train, val or test; got '" + split + "'");
  const fs::path split_dir = root / split;
  if (!fs::is_directory(split_dir)) throw IoError("missing directory " + split_dir.string() + "; " + kLayoutHelp);

  std::vector<fs::path> video_dirs;
  for (const auto& entry : fs::directory_iterator(split_dir))
    if (entry.is_directory()) video_dirs.push_back(entry.path());
  if (video_dirs.empty()) throw IoError("no videos under " + split_dir.string() + "; " + kLayoutHelp);
  std::sort(video_dirs.begin(), video_dirs.end());

  Dataset dataset{root, split, {}};
  for (const fs::path& dir : video_dirs) {
    VideoRecord video;
    video.video_id = dir.filename().string();
    std::ifstream meta(dir / "meta");
    if (!meta) throw IoError("missing meta file " + (dir / "meta").string() + "; " + kLayoutHelp);
    int frame_count = -1;
    std::string line;
    while (std::getline(meta, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
      try {
        if (key == "frame_count") frame_count = std::stoi(value);
        if (key == "seed") video.seed = std::stoull(value);
      } catch (const std::exception&) {
        throw IoError("corrupt meta entry '" + line + "' in " + (dir / "meta").string());
      }
    }
    if (frame_count < 1) throw IoError("meta without valid frame_count: " + (dir / "meta").string());
    for (int i = 0; i < frame_count; ++i) {
      const fs::path frame_path = dir / "frames" / frame_name(i);
      const fs::path mask_path = dir / "masks" / frame_name(i);
      if (!fs::exists(frame_path)) {
        throw IoError("video " + video.video_id + ": missing frame " + std::to_string(i) + " (" + frame_path.string() + ")");
      }
      if (!fs::exists(mask_path)) {
        throw IoError("video " + video.video_id + ": missing mask for frame " + std::to_string(i) + " (" +
                      mask_path.string() + ")");
      }
      video.frames.push_back(io::read_pgm(frame_path));
      Image mask = io::read_pgm(mask_path);
      for (double v : mask.values())
        if (v != 0.0 && v != 1.0) throw IoError("non-binary mask: " + mask_path.string());
      video.masks.push_back(std::move(mask));
    }
    auto count_files = [](const fs::path& p) {
      std::size_t n = 0;
      if (fs::is_directory(p))
        for (const auto& e : fs::directory_iterator(p)) n += e.is_regular_file() ? 1 : 0;
      return n;
    };
    if (count_files(dir / "frames") != count_files(dir / "masks")) {
      throw IoError("video " + video.video_id + ": frame/mask count mismatch under " + dir.string());
    }
    try {
      video.validate();
    } catch (const ShapeError& e) {
      throw IoError(std::string(e.what()) + " (" + dir.string() + ")");
    }
    dataset.videos.push_back(std::move(video));
  }
  return dataset;
}

ClipSample sample_clip(const VideoRecord& video, int target_frame, int clip_length) {
  if (clip_length < 1) throw RangeError("clip length must be >= 1");
  if (target_frame < 0 || target_frame >= video.frame_count()) {
    throw RangeError("target_frame " + std::to_string(target_frame) + " outside video " + video.video_id + " of " +
                     std::to_string(video.frame_count()) + " frames");
  }
  ClipSample clip;
  clip.video_id = video.video_id;
  clip.target_index = clip_length - 1;
  for (int k = target_frame - clip_length + 1; k <= target_frame; ++k) {
    const int idx = std::max(k, 0);
    clip.frame_indices.push_back(idx);
    clip.frames.push_back(video.frames[idx]);
    clip.masks.push_back(video.masks[idx]);
  }
  return clip;
}

ClipSample sample_clip(const Dataset& dataset, const std::string& video_id, int target_frame, int clip_length) {
  return sample_clip(dataset.find(video_id), target_frame, clip_length);
}

Image flip_horizontal(const Image& image) {
  const int h = image.dim(0), w = image.dim(1);
  Image out(image.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = image.at(y, w - 1 - x);
  return out;
}

Image flip_vertical(const Image& image) {
  const int h = image.dim(0), w = image.dim(1);
  Image out(image.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = image.at(h - 1 - y, x);
  return out;
}

ClipSample augment_flip(const ClipSample& clip, double probability, std::uint64_t seed, bool vertical) {
  if (!(probability >= 0.0 && probability <= 1.0)) throw ConfigError("flip probability must lie in [0, 1]");
  Rng rng(seed);
  if (!(uniform01(rng) < probability)) return clip;
  ClipSample out = clip;
  auto flip = vertical ? flip_vertical : flip_horizontal;
  for (auto& f : out.frames) f = flip(f);
  for (auto& m : out.masks) m = flip(m);
  return out;
}

Image resize_bilinear(const Image& image, int height, int width) {
  const int in_h = image.dim(0), in_w = image.dim(1);
  if (in_h == height && in_w == width) return image;
  auto taps = [](int in, int out, int i, int& lo, int& hi, double& f) {
    double src = (i + 0.5) * static_cast<double>(in) / out - 0.5;
    src = std::max(src, 0.0);
    lo = std::min(static_cast<int>(src), in - 1);
    hi = std::min(lo + 1, in - 1);
    f = src - lo;
  };
  Image out(Shape{height, width});
  for (int y = 0; y < height; ++y) {
    int y0, y1;
    double fy;
    taps(in_h, height, y, y0, y1, fy);
    for (int x = 0; x < width; ++x) {
      int x0, x1;
      double fx;
      taps(in_w, width, x, x0, x1, fx);
      const double top = image.at(y0, x0) * (1 - fx) + image.at(y0, x1) * fx;
      const double bot = image.at(y1, x0) * (1 - fx) + image.at(y1, x1) * fx;
      out.at(y, x) = std::clamp(top * (1 - fy) + bot * fy, 0.0, 1.0);
    }
  }
  return out;
}

Image resize_nearest(const Image& image, int height, int width) {
  const int in_h = image.dim(0), in_w = image.dim(1);
  if (in_h == height && in_w == width) return image;
  Image out(Shape{height, width});
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(static_cast<int>((y + 0.5) * in_h / height), in_h - 1);
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(static_cast<int>((x + 0.5) * in_w / width), in_w - 1);
      out.at(y, x) = image.at(sy, sx);
    }
  }
  return out;
}

ClipSample resize_and_normalize(const ClipSample& clip, int size) {
  if (size < 32 || size % 32 != 0) throw ConfigError("resize size " + std::to_string(size) + " not a positive multiple of 32");
  ClipSample out = clip;
  for (auto& f : out.frames) f = resize_bilinear(f, size, size);
  for (auto& m : out.masks) m = resize_nearest(m, size, size);
  return out;
}

}  // namespace dsanet
