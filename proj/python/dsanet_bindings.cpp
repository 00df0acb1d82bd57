#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dsanet/afsa.hpp"
#include "dsanet/autograd.hpp"
#include "dsanet/config.hpp"
#include "dsanet/errors.hpp"
#include "dsanet/experiments.hpp"
#include "dsanet/lgsa.hpp"
#include "dsanet/metrics.hpp"
#include "dsanet/model.hpp"
#include "dsanet/objectives.hpp"
#include "dsanet/ops.hpp"
#include "dsanet/speckle.hpp"
#include "dsanet/synth_data.hpp"

namespace py = pybind11;
using namespace dsanet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

Array stack(const std::vector<Image>& images) {
  if (images.empty()) return Array(std::vector<py::ssize_t>{0});
  const Image& first = images.front();
  Array out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(images.size()), first.dim(0), first.dim(1)});
  double* dst = out.mutable_data();
  for (const Image& im : images) dst = std::copy(im.data(), im.data() + im.size(), dst);
  return out;
}

std::vector<Image> unstack(const Array& a) {
  if (a.ndim() != 3) throw ShapeError("expected a (T, H, W) array");
  std::vector<Image> out;
  const std::size_t per = static_cast<std::size_t>(a.shape(1) * a.shape(2));
  for (py::ssize_t t = 0; t < a.shape(0); ++t)
    out.emplace_back(Shape{static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2))},
                     std::vector<double>(a.data() + t * per, a.data() + (t + 1) * per));
  return out;
}

ExperimentConfig config_from(const std::string& profile, const std::string& overrides) {
  ExperimentConfig c = ExperimentConfig::for_profile(parse_profile(profile));
  if (!overrides.empty()) apply_config(c, ConfigFile::parse(overrides, "<overrides>"));
  c.validate();
  return c;
}

py::dict report_dict(const metrics::MetricsReport& r) {
  py::dict d;
  d["variant"] = r.variant;
  d["noise"] = r.noise_tag;
  d["mae"] = r.mae;
  d["iou"] = r.iou;
  d["dice"] = r.dice;
  d["frames"] = r.n_frames;
  if (r.fps) d["fps"] = *r.fps;
  return d;
}

SpeckleConfig noise_of(std::optional<double> look, std::uint64_t seed) {
  return look ? SpeckleConfig::with_look(*look, seed) : SpeckleConfig::clean();
}

class Model {
 public:
  explicit Model(std::unique_ptr<DsaNet> net, ExperimentConfig config) : net_(std::move(net)), config_(std::move(config)) {}

  Array predict(const Array& frames) const {
    NoGradGuard guard;
    const Var logits = net_->forward_target(unstack(frames));
    const Tensor& v = logits.value();
    return to_array(ops::reshape(ops::sigmoid(logits), Shape{v.dim(1), v.dim(2)}).value());
  }

  std::string variant() const { return to_string(net_->config().variant); }
  std::size_t parameter_count() const { return net_->params().element_count(); }
  DsaNet& net() { return *net_; }
  const ExperimentConfig& config() const { return config_; }

 private:
  std::unique_ptr<DsaNet> net_;
  ExperimentConfig config_;
};

std::vector<ClipSample> split_clips(const ExperimentConfig& c, const std::string& split) {
  const auto s = experiments::make_synthetic_splits(c);
  const auto& videos = split == "train" ? s.train : split == "val" ? s.val : split == "test" ? s.test
                       : throw ConfigError("split must be train, val or test; got '" + split + "'");
  return experiments::enumerate_clips(videos, c.clip_length);
}

}  // namespace

PYBIND11_MODULE(_dsanet, m) {
  m.doc() = "Noise-robust ultrasound video segmentation";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ArityError>(m, "ArityError", PyExc_ValueError);
  py::register_exception<VersionError>(m, "VersionError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "synth_videos",
      [](int num_videos, int frames, int size, std::uint64_t seed) {
        SynthConfig c;
        c.num_videos = num_videos;
        c.frames_per_video = frames;
        c.image_size = size;
        c.master_seed = seed;
        py::list out;
        for (const auto& v : generate_dataset(c)) {
          py::dict d;
          d["id"] = v.video_id;
          d["frames"] = stack(v.frames);
          d["masks"] = stack(v.masks);
          out.append(d);
        }
        return out;
      },
      py::arg("num_videos") = 2, py::arg("frames") = 6, py::arg("size") = 64, py::arg("seed") = 0,
      "Synthetic lesion videos as dicts with 'id', 'frames' (T, H, W) and 'masks' (T, H, W).");

  m.def(
      "speckle",
      [](const Array& image, double look, std::uint64_t seed, bool clip) {
        return to_array(apply_speckle(to_tensor(image), SpeckleConfig::with_look(look, seed, clip)));
      },
      py::arg("image"), py::arg("look"), py::arg("seed") = 0, py::arg("clip") = true,
      "Multiply by unit-mean Gamma speckle with the given look number.");

  m.def(
      "channel_similarity",
      [](const Array& previous, const Array& current) {
        return to_array(afsa::channel_similarity(Var(to_tensor(previous)), Var(to_tensor(current))).data.value());
      },
      py::arg("previous"), py::arg("current"), "Per-channel cosine similarity, shape (C, H*W).");

  m.def(
      "afsa_chain",
      [](const std::vector<Array>& features) {
        std::vector<Var> vars;
        for (const auto& f : features) vars.emplace_back(to_tensor(f));
        return to_array(afsa::afsa_chain(vars).value());
      },
      py::arg("features"), "Fuse a list of (C, H, W) feature maps oldest first.");

  m.def(
      "channel_reassemble",
      [](const Array& global, const Array& local) {
        const auto [a, b] = lgsa::channel_reassemble(Var(to_tensor(global)), Var(to_tensor(local)));
        return py::make_tuple(to_array(a.value()), to_array(b.value()));
      },
      py::arg("global_features"), py::arg("local_features"));

  m.def(
      "weight_map", [](const Array& gt, int kernel, double lambda) {
        return to_array(objectives::weight_map(to_tensor(gt), kernel, lambda).data);
      },
      py::arg("gt"), py::arg("kernel_size") = 31, py::arg("lam") = 5.0);
  m.def(
      "dice_loss", [](const Array& p, const Array& g) { return objectives::dice_loss(to_tensor(p), to_tensor(g)); },
      py::arg("prob"), py::arg("gt"));
  m.def(
      "wbce_loss",
      [](const Array& p, const Array& g) {
        const Tensor gt = to_tensor(g);
        return objectives::wbce_loss(to_tensor(p), gt, objectives::weight_map(gt));
      },
      py::arg("prob"), py::arg("gt"));
  m.def(
      "wiou_loss",
      [](const Array& p, const Array& g) {
        const Tensor gt = to_tensor(g);
        return objectives::wiou_loss(to_tensor(p), gt, objectives::weight_map(gt));
      },
      py::arg("prob"), py::arg("gt"));

  m.def(
      "mae", [](const Array& p, const Array& g, bool binarize) { return metrics::mae(to_tensor(p), to_tensor(g), binarize); },
      py::arg("prob"), py::arg("gt"), py::arg("binarize") = false, "Mean absolute error in percent.");
  m.def(
      "iou_dice", [](const Array& p, const Array& g) { return metrics::iou_dice(to_tensor(p), to_tensor(g)); },
      py::arg("prob"), py::arg("gt"), "(IoU, Dice) in percent at threshold 0.5.");

  py::class_<Model>(m, "Model")
      .def_property_readonly("variant", &Model::variant)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def("predict", &Model::predict, py::arg("frames"),
           "Foreground probability (H, W) for the last frame of a (T, H, W) clip.");

  m.def(
      "build_model",
      [](const std::string& variant, std::uint64_t seed, const std::string& profile) {
        ExperimentConfig c = ExperimentConfig::for_profile(parse_profile(profile));
        c.variant = parse_variant(variant);
        c.seed = seed;
        ExperimentConfig effective;
        auto net = experiments::build_model(c, &effective);
        return Model(std::move(net), effective);
      },
      py::arg("variant") = "FULL", py::arg("seed") = 0, py::arg("profile") = "desk");

  m.def(
      "load_model",
      [](const std::filesystem::path& path) {
        auto loaded = experiments::load_model(path);
        return Model(std::move(loaded.model), loaded.config);
      },
      py::arg("path"));

  m.def(
      "train",
      [](const std::string& overrides, const std::string& out_dir, const std::string& profile) {
        const ExperimentConfig c = config_from(profile, overrides);
        experiments::TrainOptions opts;
        opts.out_dir = out_dir;
        experiments::TrainResult r;
        {
          py::gil_scoped_release release;
          r = experiments::train(c, split_clips(c, "train"), opts);
        }
        py::list losses;
        for (const auto& s : r.log.steps) losses.append(s.loss);
        py::dict out;
        out["losses"] = losses;
        out["checkpoint"] = r.final_checkpoint.string();
        out["model"] = Model(std::move(r.model), r.config);
        return out;
      },
      py::arg("overrides") = "", py::arg("out_dir") = "", py::arg("profile") = "desk",
      "Train on the synthetic train split. `overrides` is config-file text, e.g. '[experiment]\\nmax_steps = 5'.");

  m.def(
      "evaluate",
      [](Model& model, std::optional<double> look, std::uint64_t noise_seed, const std::string& split) {
        experiments::EvalOptions eo;
        eo.input_size = model.config().input_size;
        eo.mae_binarized = model.config().mae_binarized;
        const auto clips = split_clips(model.config(), split);
        metrics::MetricsReport r;
        {
          py::gil_scoped_release release;
          r = experiments::evaluate(model.net(), clips, noise_of(look, noise_seed), eo);
        }
        return report_dict(r);
      },
      py::arg("model"), py::arg("look") = py::none(), py::arg("noise_seed") = 0, py::arg("split") = "test",
      "Metrics on a synthetic split, clean when look is None.");
}
