#include "dsanet/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "dsanet/errors.hpp"

namespace dsanet::metrics {

double mae(const Tensor& prob, const Tensor& gt, bool binarize) {
  if (prob.size() != gt.size()) throw ShapeError("mae: shape mismatch " + to_string(prob.shape()) + " vs " + to_string(gt.shape()));
  if (prob.empty()) throw ShapeError("mae: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = binarize ? (prob[i] >= 0.5 ? 1.0 : 0.0) : prob[i];
    s += std::abs(p - gt[i]);
  }
  return 100.0 * s / static_cast<double>(prob.size());
}

std::pair<double, double> iou_dice(const Tensor& prob, const Tensor& gt, double threshold) {
  if (prob.size() != gt.size()) {
    throw ShapeError("iou_dice: shape mismatch " + to_string(prob.shape()) + " vs " + to_string(gt.shape()));
  }
  long inter = 0, pred = 0, truth = 0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const bool p = prob[i] >= threshold;
    const bool g = gt[i] >= 0.5;
    inter += (p && g);
    pred += p;
    truth += g;
  }
  const long uni = pred + truth - inter;
  if (uni == 0) return {100.0, 100.0};
  return {100.0 * inter / static_cast<double>(uni), 100.0 * 2.0 * inter / static_cast<double>(pred + truth)};
}

void Accumulator::add(const Tensor& prob, const Tensor& gt, bool binarize_mae) {
  mae_sum_ += mae(prob, gt, binarize_mae);
  const auto [iou, dice] = iou_dice(prob, gt);
  iou_sum_ += iou;
  dice_sum_ += dice;
  ++frames_;
}

MetricsReport Accumulator::report(const std::string& variant, const std::string& noise_tag) const {
  MetricsReport r;
  r.variant = variant;
  r.noise_tag = noise_tag;
  r.n_frames = frames_;
  if (frames_ > 0) {
    r.mae = mae_sum_ / frames_;
    r.iou = iou_sum_ / frames_;
    r.dice = dice_sum_ / frames_;
  }
  return r;
}

BenchmarkResult benchmark_fps(const std::function<void()>& infer_once, int warmup_iters, int timed_iters, int threads) {
  if (warmup_iters < 1) throw ConfigError("benchmark_fps: warmup_iters must be >= 1");
  if (timed_iters < 10) throw ConfigError("benchmark_fps: timed_iters must be >= 10");
  for (int i = 0; i < warmup_iters; ++i) infer_once();
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < timed_iters; ++i) infer_once();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  BenchmarkResult r;
  r.seconds = std::max(seconds, 1e-12);
  r.timed_iters = timed_iters;
  r.fps = timed_iters / r.seconds;
  r.threads = threads;
  return r;
}

namespace {

// Shortest representation that parses back to the same double.
std::string exact(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ConfigError("bad number for " + key + ": " + s);
  return v;
}

std::string fixed1(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1) << v;
  return s.str();
}

std::string pad(const std::string& s, std::size_t width, bool left = false) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

// "68.6 (v3.1)" style cell: arrows mark the direction of change vs clean.
std::string delta_cell(double value, double reference) {
  const double d = value - reference;
  std::string cell = fixed1(value);
  if (std::abs(d) < 0.05) return cell + " (=0.0)";
  return cell + (d > 0 ? " (↑" : " (↓") + fixed1(std::abs(d)) + ")";
}

int noise_rank(const std::string& tag) {
  if (tag == "clean") return 0;
  if (tag == "L25") return 1;
  if (tag == "L20") return 2;
  return 3;
}

}  // namespace

std::string format_record(const MetricsReport& r) {
  std::ostringstream s;
  s << "variant=" << r.variant << " noise=" << r.noise_tag << " n_frames=" << r.n_frames << " threads=" << r.threads
    << " mae=" << exact(r.mae) << " iou=" << exact(r.iou) << " dice=" << exact(r.dice);
  if (r.fps) s << " fps=" << exact(*r.fps);
  return s.str();
}

MetricsReport parse_record(const std::string& line) {
  MetricsReport r;
  std::istringstream in(line);
  std::string field;
  bool any = false;
  while (in >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed record field '" + field + "'");
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    any = true;
    if (key == "variant") r.variant = value;
    else if (key == "noise") r.noise_tag = value;
    else if (key == "n_frames") r.n_frames = static_cast<int>(parse_double(value, key));
    else if (key == "threads") r.threads = static_cast<int>(parse_double(value, key));
    else if (key == "mae") r.mae = parse_double(value, key);
    else if (key == "iou") r.iou = parse_double(value, key);
    else if (key == "dice") r.dice = parse_double(value, key);
    else if (key == "fps") r.fps = parse_double(value, key);
    else throw ConfigError("unknown record key '" + key + "'");
  }
  if (!any) throw ConfigError("empty record");
  return r;
}

std::vector<MetricsReport> parse_records(const std::string& text) {
  std::vector<MetricsReport> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    out.push_back(parse_record(line));
  }
  return out;
}

FormattedReport format_report(const std::vector<MetricsReport>& reports, Layout layout) {
  FormattedReport out;
  for (const auto& r : reports) out.records += format_record(r) + "\n";

  std::ostringstream t;
  if (layout == Layout::kRows) {
    t << pad("Method", 16, true) << pad("MAE↓", 10) << pad("IoU↑", 10) << pad("Dice↑", 10)
      << pad("FPS↑", 10) << "\n";
    for (const auto& r : reports) {
      t << pad(r.variant + (r.noise_tag == "clean" ? "" : " " + r.noise_tag), 16, true) << pad(fixed1(r.mae), 8)
        << pad(fixed1(r.iou), 8) << pad(fixed1(r.dice), 8) << pad(r.fps ? fixed1(*r.fps) : "-", 8) << "\n";
    }
    out.table = t.str();
    return out;
  }

  t << pad("Variant / noise", 22, true) << pad("MAE↓", 16) << pad("IoU↑", 16) << pad("Dice↑", 16) << "\n";
  std::vector<std::string> order;
  std::map<std::string, std::vector<const MetricsReport*>> groups;
  for (const auto& r : reports) {
    if (!groups.count(r.variant)) order.push_back(r.variant);
    groups[r.variant].push_back(&r);
  }
  for (const std::string& variant : order) {
    auto rows = groups[variant];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const MetricsReport* a, const MetricsReport* b) { return noise_rank(a->noise_tag) < noise_rank(b->noise_tag); });
    const MetricsReport* clean = rows.front()->noise_tag == "clean" ? rows.front() : nullptr;
    t << variant << "\n";
    for (const MetricsReport* r : rows) {
      const std::string label = "  " + (r->noise_tag == "clean" ? std::string("clean") : r->noise_tag);
      if (!clean || r == clean) {
        t << pad(label, 22, true) << pad(fixed1(r->mae), 14) << pad(fixed1(r->iou), 14) << pad(fixed1(r->dice), 14) << "\n";
      } else {
        t << pad(label, 22, true) << pad(delta_cell(r->mae, clean->mae), 16) << pad(delta_cell(r->iou, clean->iou), 16)
          << pad(delta_cell(r->dice, clean->dice), 16) << "\n";
      }
    }
  }
  out.table = t.str();
  return out;
}

}  // namespace dsanet::metrics
