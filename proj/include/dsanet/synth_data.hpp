#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsanet/tensor.hpp"

namespace dsanet {

struct VideoRecord {
  std::string video_id;
  std::vector<Image> frames;  // (H, W) in [0, 1]
  std::vector<Image> masks;   // (H, W) in {0, 1}
  std::uint64_t seed = 0;

  int frame_count() const { return static_cast<int>(frames.size()); }
  // Throws ShapeError if frames/masks disagree or values leave their range.
  void validate() const;
};

struct ClipSample {
  std::vector<Image> frames;
  std::vector<Image> masks;
  int target_index = 0;  // always T - 1
  std::string video_id;
  std::vector<int> frame_indices;
  std::string noise_tag = "clean";

  int length() const { return static_cast<int>(frames.size()); }
};

struct SynthConfig {
  int num_videos = 8;
  int frames_per_video = 12;
  int image_size = 64;
  int lesion_count_min = 1;
  int lesion_count_max = 1;
  double lesion_speed = 0.8;        // pixels per frame
  double lesion_deform_rate = 0.02;  // relative axis change per frame
  double lesion_scale_min = 0.16;    // semi-axis as a fraction of image_size
  double lesion_scale_max = 0.26;
  double background_texture_scale = 8.0;  // correlation length of tissue texture, pixels
  double tissue_look = 40.0;              // Gamma look number of the baked-in tissue speckle
  std::uint64_t master_seed = 0;

  // Throws ConfigError naming the first violated field.
  void validate() const;
};

// Deterministic in config (including master_seed); video v is generated from
// derive_seed(master_seed, v) and is independent of the others.
std::vector<VideoRecord> generate_dataset(const SynthConfig& config);
VideoRecord generate_video(const SynthConfig& config, int video_index);

struct Dataset {
  std::filesystem::path root;
  std::string split;
  std::vector<VideoRecord> videos;

  const VideoRecord& find(const std::string& video_id) const;  // LookupError if absent
  std::size_t total_frames() const;
};

// Layout: <root>/<split>/<video_id>/{frames/NNNN.pgm, masks/NNNN.pgm, meta}.
// Frames are 16-bit PGM, masks 8-bit PGM, meta holds key=value lines.
void save_dataset(const std::vector<VideoRecord>& records, const std::filesystem::path& root,
                  const std::string& split = "train");
Dataset load_dataset(const std::filesystem::path& root, const std::string& split);
bool is_valid_split(const std::string& split);

// Frames [target - T + 1, target]; indices below zero repeat frame 0.
ClipSample sample_clip(const Dataset& dataset, const std::string& video_id, int target_frame, int clip_length);
ClipSample sample_clip(const VideoRecord& video, int target_frame, int clip_length);

// With the given probability, mirrors every frame and mask of the clip
// (horizontally, or vertically when `vertical` is set).
ClipSample augment_flip(const ClipSample& clip, double probability, std::uint64_t seed, bool vertical = false);

Image flip_horizontal(const Image& image);
Image flip_vertical(const Image& image);

// Frames bilinear, masks nearest neighbour; size must be a positive multiple of 32.
ClipSample resize_and_normalize(const ClipSample& clip, int size);
Image resize_bilinear(const Image& image, int height, int width);
Image resize_nearest(const Image& image, int height, int width);

}  // namespace dsanet
