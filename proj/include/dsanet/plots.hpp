#pragma once

#include <filesystem>
#include <vector>

#include "dsanet/experiments.hpp"
#include "dsanet/image_io.hpp"
#include "dsanet/metrics.hpp"

namespace dsanet::plots {

// Per-step total loss as a polyline over light grid lines.
io::RgbImage loss_curve(const experiments::TrainLog& log, int width = 640, int height = 360);

// Grouped bars: one group per variant, one bar per noise tag, height = Dice.
io::RgbImage dice_bars(const std::vector<metrics::MetricsReport>& reports, int width = 640, int height = 360);

// Frame | ground truth | prediction, side by side; the prediction panel
// tints true positives green, false positives red and misses blue.
io::RgbImage overlay_panel(const Image& frame, const Image& mask, const Image& prob, double threshold = 0.5);

struct PlotFiles {
  std::vector<std::filesystem::path> written;
};

// Writes loss_curve.png, dice_vs_noise.png and overlay_NN.png for whatever
// inputs are non-empty. Output bytes depend only on the inputs.
PlotFiles emit_plots(const std::filesystem::path& out_dir, const experiments::TrainLog* log,
                     const std::vector<metrics::MetricsReport>* reports,
                     const std::vector<ClipSample>* clips = nullptr, const std::vector<Tensor>* probs = nullptr);

}  // namespace dsanet::plots
