#include "dsanet/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "dsanet/errors.hpp"
#include "dsanet/synth_data.hpp"

namespace dsanet::plots {

namespace {

using Color = std::array<std::uint8_t, 3>;

constexpr Color kAxis{40, 40, 40};
constexpr Color kGrid{225, 225, 225};
constexpr std::array<Color, 6> kPalette{{{31, 119, 180}, {255, 127, 14}, {214, 39, 40}, {44, 160, 44},
                                          {148, 103, 189}, {140, 86, 75}}};

constexpr int kMargin = 24;

void put(io::RgbImage& img, int x, int y, const Color& c) { img.set(x, y, c[0], c[1], c[2]); }

void line(io::RgbImage& img, int x0, int y0, int x1, int y1, const Color& c) {
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void rect(io::RgbImage& img, int x0, int y0, int x1, int y1, const Color& c) {
  for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) put(img, x, y, c);
}

void frame_axes(io::RgbImage& img) {
  const int w = img.width, h = img.height;
  for (int k = 1; k < 5; ++k) {
    const int y = kMargin + (h - 2 * kMargin) * k / 5;
    line(img, kMargin, y, w - kMargin, y, kGrid);
  }
  line(img, kMargin, h - kMargin, w - kMargin, h - kMargin, kAxis);
  line(img, kMargin, kMargin, kMargin, h - kMargin, kAxis);
}

std::uint8_t gray(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

io::RgbImage loss_curve(const experiments::TrainLog& log, int width, int height) {
  io::RgbImage img(width, height);
  frame_axes(img);
  const auto& steps = log.steps;
  if (steps.empty()) return img;
  double hi = 0.0;
  for (const auto& s : steps)
    if (std::isfinite(s.loss)) hi = std::max(hi, s.loss);
  if (hi <= 0.0) hi = 1.0;
  const int pw = width - 2 * kMargin, ph = height - 2 * kMargin;
  auto px = [&](std::size_t i) {
    return kMargin + (steps.size() == 1 ? 0 : static_cast<int>(std::lround(double(i) * pw / double(steps.size() - 1))));
  };
  auto py = [&](double v) { return height - kMargin - static_cast<int>(std::lround(std::clamp(v / hi, 0.0, 1.0) * ph)); };
  for (std::size_t i = 1; i < steps.size(); ++i)
    line(img, px(i - 1), py(steps[i - 1].loss), px(i), py(steps[i].loss), kPalette[0]);
  if (steps.size() == 1) put(img, px(0), py(steps[0].loss), kPalette[0]);
  return img;
}

io::RgbImage dice_bars(const std::vector<metrics::MetricsReport>& reports, int width, int height) {
  io::RgbImage img(width, height);
  frame_axes(img);
  if (reports.empty()) return img;
  std::vector<std::string> variants, tags;
  for (const auto& r : reports) {
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
    if (std::find(tags.begin(), tags.end(), r.noise_tag) == tags.end()) tags.push_back(r.noise_tag);
  }
  const int pw = width - 2 * kMargin, ph = height - 2 * kMargin;
  const int group = pw / static_cast<int>(variants.size());
  const int bar = std::max(1, (group - 8) / static_cast<int>(tags.size()));
  for (const auto& r : reports) {
    const int g = static_cast<int>(std::find(variants.begin(), variants.end(), r.variant) - variants.begin());
    const int t = static_cast<int>(std::find(tags.begin(), tags.end(), r.noise_tag) - tags.begin());
    const int x0 = kMargin + g * group + 4 + t * bar;
    const int top = height - kMargin - static_cast<int>(std::lround(std::clamp(r.dice / 100.0, 0.0, 1.0) * ph));
    if (top < height - kMargin) rect(img, x0, top, x0 + bar - 2, height - kMargin - 1, kPalette[t % kPalette.size()]);
  }
  return img;
}

io::RgbImage overlay_panel(const Image& frame, const Image& mask, const Image& prob, double threshold) {
  require_same_shape(frame, mask, "overlay_panel");
  const Image p = prob.rank() == 3 ? prob.reshaped({prob.dim(-2), prob.dim(-1)}) : prob;
  require_same_shape(frame, p, "overlay_panel");
  const int h = frame.dim(0), w = frame.dim(1), gap = 4;
  io::RgbImage img(3 * w + 2 * gap, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t f = gray(frame.at(y, x));
      img.set(x, y, f, f, f);
      const std::uint8_t m = mask.at(y, x) > 0.5 ? 255 : 0;
      img.set(w + gap + x, y, m, m, m);
      const bool pred = p.at(y, x) >= threshold, truth = mask.at(y, x) > 0.5;
      std::uint8_t r = f, g = f, b = f;
      if (pred && truth) g = 255, r = static_cast<std::uint8_t>(f / 2), b = static_cast<std::uint8_t>(f / 2);
      else if (pred) r = 255, g = static_cast<std::uint8_t>(f / 2), b = static_cast<std::uint8_t>(f / 2);
      else if (truth) b = 255, r = static_cast<std::uint8_t>(f / 2), g = static_cast<std::uint8_t>(f / 2);
      img.set(2 * (w + gap) + x, y, r, g, b);
    }
  }
  return img;
}

PlotFiles emit_plots(const std::filesystem::path& out_dir, const experiments::TrainLog* log,
                     const std::vector<metrics::MetricsReport>* reports, const std::vector<ClipSample>* clips,
                     const std::vector<Tensor>* probs) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) throw IoError("cannot create plot directory " + out_dir.string());
  PlotFiles files;
  auto emit = [&](const std::string& name, const io::RgbImage& img) {
    const auto path = out_dir / name;
    io::write_png(path, img);
    files.written.push_back(path);
  };
  if (log && !log->steps.empty()) emit("loss_curve.png", loss_curve(*log));
  if (reports && !reports->empty()) emit("dice_vs_noise.png", dice_bars(*reports));
  if (clips && probs) {
    if (clips->size() != probs->size()) throw ShapeError("emit_plots: one prediction per clip is required");
    for (std::size_t i = 0; i < clips->size(); ++i) {
      const ClipSample& c = (*clips)[i];
      const Tensor& p = (*probs)[i];
      const int size = p.dim(-1);
      const Image frame = resize_bilinear(c.frames.back(), size, size);
      const Image mask = resize_nearest(c.masks.back(), size, size);
      char name[32];
      std::snprintf(name, sizeof name, "overlay_%02zu.png", i);
      emit(name, overlay_panel(frame, mask, p));
    }
  }
  return files;
}

}  // namespace dsanet::plots
