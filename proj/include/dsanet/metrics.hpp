#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsanet/tensor.hpp"

namespace dsanet::metrics {

// Scores for one model/noise condition. mae is x100; iou and dice are percent.
struct MetricsReport {
  std::string variant;
  std::string noise_tag = "clean";
  double mae = 0.0;
  double iou = 0.0;
  double dice = 0.0;
  std::optional<double> fps;
  int n_frames = 0;
  int threads = 1;

  bool operator==(const MetricsReport&) const = default;
};

// Mean |prob - gt| x 100 on the continuous map, or on prob binarised at 0.5
// when `binarize` is set.
double mae(const Tensor& prob, const Tensor& gt, bool binarize = false);

// Binarise at threshold, then IoU and Dice in percent. Both empty -> (100, 100).
std::pair<double, double> iou_dice(const Tensor& prob, const Tensor& gt, double threshold = 0.5);

// Accumulates frame scores into a report (simple means over frames).
class Accumulator {
 public:
  void add(const Tensor& prob, const Tensor& gt, bool binarize_mae = false);
  MetricsReport report(const std::string& variant, const std::string& noise_tag) const;
  int frames() const { return frames_; }

 private:
  double mae_sum_ = 0.0, iou_sum_ = 0.0, dice_sum_ = 0.0;
  int frames_ = 0;
};

struct BenchmarkResult {
  double fps = 0.0;
  double seconds = 0.0;
  int timed_iters = 0;
  int threads = 1;
};

// Calls `infer_once` warmup_iters times untimed, then timed_iters times under
// a steady clock. Each call must process one full clip (batch 1).
BenchmarkResult benchmark_fps(const std::function<void()>& infer_once, int warmup_iters, int timed_iters,
                              int threads = 1);

enum class Layout { kRows, kGrouped };

struct FormattedReport {
  std::string table;    // aligned text, columns MAE, IoU, Dice, FPS
  std::string records;  // one key=value record per line
};

// kRows: one row per report. kGrouped: rows grouped per variant in the order
// clean, L25, L20 (then any other tags) with deltas against the clean row.
FormattedReport format_report(const std::vector<MetricsReport>& reports, Layout layout);

std::string format_record(const MetricsReport& report);
MetricsReport parse_record(const std::string& line);
std::vector<MetricsReport> parse_records(const std::string& text);

}  // namespace dsanet::metrics
