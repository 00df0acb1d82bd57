#include "dsanet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "dsanet/errors.hpp"

namespace dsanet::ops {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

MatMap as_matrix(Tensor& t, int rows, int cols) { return MatMap(t.data(), rows, cols); }
ConstMatMap as_matrix(const Tensor& t, int rows, int cols) { return ConstMatMap(t.data(), rows, cols); }

void require_rank(const Var& v, int rank, const char* op) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + to_string(v.shape()));
  }
}

int leading(const Tensor& t) { return t.rank() == 0 ? 1 : t.dim(0); }

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out += b.value();
  return Var::from_op(std::move(out), {a, b}, [](Node& n) {
    for (std::size_t i = 0; i < 2; ++i)
      if (Tensor* g = n.parent_grad(i)) *g += n.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](Node& n) {
    if (Tensor* g = n.parent_grad(0)) *g += n.grad;
    if (Tensor* g = n.parent_grad(1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= n.grad[i];
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return Var::from_op(std::move(out), {a, b}, [](Node& n) {
    const Tensor& av = n.parent_value(0);
    const Tensor& bv = n.parent_value(1);
    if (Tensor* g = n.parent_grad(0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * bv[i];
    if (Tensor* g = n.parent_grad(1))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * av[i];
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  out *= s;
  return Var::from_op(std::move(out), {a}, [s](Node& n) {
    if (Tensor* g = n.parent_grad(0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += s * n.grad[i];
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v += s;
  return Var::from_op(std::move(out), {a}, [](Node& n) {
    if (Tensor* g = n.parent_grad(0)) *g += n.grad;
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = v < 0.0 ? 0.0 : v;  // NaN passes through
  return Var::from_op(std::move(out), {a}, [](Node& n) {
    const Tensor& av = n.parent_value(0);
    if (Tensor* g = n.parent_grad(0))
      for (std::size_t i = 0; i < g->size(); ++i)
        if (av[i] > 0.0) (*g)[i] += n.grad[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return Var::from_op(std::move(out), {a}, [](Node& n) {
    if (Tensor* g = n.parent_grad(0))
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double y = n.value[i];
        (*g)[i] += n.grad[i] * y * (1.0 - y);
      }
  });
}

Var sum(const Var& a) {
  Tensor out(Shape{}, a.value().sum());
  return Var::from_op(std::move(out), {a}, [](Node& n) {
    if (Tensor* g = n.parent_grad(0))
      for (double& v : g->values()) v += n.grad[0];
  });
}

Var mean(const Var& a) {
  const double count = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / count);
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return Var::from_op(std::move(out), {a}, [](Node& n) {
    if (Tensor* g = n.parent_grad(0))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i];
  });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
  require_rank(x, 3, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  const int channels = x.dim(0), height = x.dim(1), width = x.dim(2);
  const int out_channels = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != channels || weight.dim(3) != k) {
    throw ShapeError("conv2d: weight " + to_string(weight.shape()) + " incompatible with input " +
                     to_string(x.shape()));
  }
  if (bias.defined() && (bias.value().rank() != 1 || bias.dim(0) != out_channels)) {
    throw ShapeError("conv2d: bias shape " + to_string(bias.shape()));
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  const int out_h = (height + 2 * padding - k) / stride + 1;
  const int out_w = (width + 2 * padding - k) / stride + 1;
  if (out_h < 1 || out_w < 1) throw ShapeError("conv2d: input " + to_string(x.shape()) + " too small for kernel");

  const int patch = channels * k * k;
  const int positions = out_h * out_w;
  const bool pointwise = (k == 1 && stride == 1 && padding == 0);

  // Column matrix (patch, positions); for pointwise convs the input already
  // has that layout.
  auto cols = std::make_shared<Tensor>();
  if (!pointwise) {
    *cols = Tensor(Shape{patch, positions});
    double* dst = cols->data();
    const Tensor& xv = x.value();
    for (int c = 0; c < channels; ++c)
      for (int ki = 0; ki < k; ++ki)
        for (int kj = 0; kj < k; ++kj) {
          for (int oh = 0; oh < out_h; ++oh) {
            const int ih = oh * stride - padding + ki;
            for (int ow = 0; ow < out_w; ++ow) {
              const int iw = ow * stride - padding + kj;
              *dst++ = (ih >= 0 && ih < height && iw >= 0 && iw < width) ? xv.at(c, ih, iw) : 0.0;
            }
          }
        }
  }
  const Tensor& col_ref = pointwise ? x.value() : *cols;

  Tensor out(Shape{out_channels, out_h, out_w});
  {
    auto o = as_matrix(out, out_channels, positions);
    o.noalias() = as_matrix(weight.value(), out_channels, patch) * as_matrix(col_ref, patch, positions);
    if (bias.defined())
      for (int oc = 0; oc < out_channels; ++oc) o.row(oc).array() += bias.value()[oc];
  }

  std::vector<Var> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return Var::from_op(
      std::move(out), std::move(parents),
      [=](Node& n) {
        const Tensor& cols_v = pointwise ? n.parent_value(0) : *cols;
        auto go = as_matrix(static_cast<const Tensor&>(n.grad), out_channels, positions);
        if (Tensor* gw = n.parent_grad(1)) {
          as_matrix(*gw, out_channels, patch).noalias() += go * as_matrix(cols_v, patch, positions).transpose();
        }
        if (n.parents.size() > 2) {
          if (Tensor* gb = n.parent_grad(2))
            for (int oc = 0; oc < out_channels; ++oc) (*gb)[oc] += go.row(oc).sum();
        }
        if (Tensor* gx = n.parent_grad(0)) {
          auto w = as_matrix(n.parent_value(1), out_channels, patch);
          if (pointwise) {
            as_matrix(*gx, patch, positions).noalias() += w.transpose() * go;
            return;
          }
          Tensor gcols(Shape{patch, positions});
          as_matrix(gcols, patch, positions).noalias() = w.transpose() * go;
          const double* src = gcols.data();
          for (int c = 0; c < channels; ++c)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj)
                for (int oh = 0; oh < out_h; ++oh) {
                  const int ih = oh * stride - padding + ki;
                  for (int ow = 0; ow < out_w; ++ow, ++src) {
                    const int iw = ow * stride - padding + kj;
                    if (ih >= 0 && ih < height && iw >= 0 && iw < width) gx->at(c, ih, iw) += *src;
                  }
                }
        }
      });
}

namespace {

struct LinearTaps {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

// Half-pixel-center source taps for resizing `in` samples to `out` samples.
LinearTaps make_taps(int in, int out) {
  LinearTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double ratio = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    t.lo[i] = lo;
    t.hi[i] = std::min(lo + 1, in - 1);
    t.frac[i] = src - lo;
  }
  return t;
}

}  // namespace

Var upsample_bilinear(const Var& x, int height, int width) {
  require_rank(x, 3, "upsample_bilinear");
  const int channels = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
  if (height < 1 || width < 1) throw ShapeError("upsample_bilinear: invalid target size");
  auto rows = std::make_shared<LinearTaps>(make_taps(in_h, height));
  auto cols = std::make_shared<LinearTaps>(make_taps(in_w, width));
  Tensor out(Shape{channels, height, width});
  const Tensor& xv = x.value();
  for (int c = 0; c < channels; ++c)
    for (int i = 0; i < height; ++i) {
      const int r0 = rows->lo[i], r1 = rows->hi[i];
      const double fr = rows->frac[i];
      for (int j = 0; j < width; ++j) {
        const int c0 = cols->lo[j], c1 = cols->hi[j];
        const double fc = cols->frac[j];
        const double top = xv.at(c, r0, c0) * (1.0 - fc) + xv.at(c, r0, c1) * fc;
        const double bot = xv.at(c, r1, c0) * (1.0 - fc) + xv.at(c, r1, c1) * fc;
        out.at(c, i, j) = top * (1.0 - fr) + bot * fr;
      }
    }
  return Var::from_op(std::move(out), {x}, [=](Node& n) {
    Tensor* gx = n.parent_grad(0);
    if (!gx) return;
    for (int c = 0; c < channels; ++c)
      for (int i = 0; i < height; ++i) {
        const int r0 = rows->lo[i], r1 = rows->hi[i];
        const double fr = rows->frac[i];
        for (int j = 0; j < width; ++j) {
          const int c0 = cols->lo[j], c1 = cols->hi[j];
          const double fc = cols->frac[j];
          const double g = n.grad.at(c, i, j);
          gx->at(c, r0, c0) += g * (1.0 - fr) * (1.0 - fc);
          gx->at(c, r0, c1) += g * (1.0 - fr) * fc;
          gx->at(c, r1, c0) += g * fr * (1.0 - fc);
          gx->at(c, r1, c1) += g * fr * fc;
        }
      }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  Shape rest(parts[0].shape().begin() + 1, parts[0].shape().end());
  int total = 0;
  for (const Var& p : parts) {
    Shape r(p.shape().begin() + 1, p.shape().end());
    if (r != rest) throw ShapeError("concat_channels: trailing shape mismatch " + to_string(p.shape()));
    total += p.dim(0);
  }
  Shape shape{total};
  shape.insert(shape.end(), rest.begin(), rest.end());
  Tensor out(shape);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    offsets.push_back(offset);
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + offset);
    offset += p.value().size();
  }
  return Var::from_op(std::move(out), parts, [offsets](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i)
      if (Tensor* g = n.parent_grad(i))
        for (std::size_t e = 0; e < g->size(); ++e) (*g)[e] += n.grad[offsets[i] + e];
  });
}

Var slice_channels(const Var& x, int begin, int end) {
  const int channels = x.dim(0);
  if (begin < 0 || end > channels || begin >= end) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for " + to_string(x.shape()));
  }
  Shape shape = x.shape();
  shape[0] = end - begin;
  const std::size_t stride = x.value().size() / channels;
  Tensor out(shape);
  std::copy(x.value().data() + begin * stride, x.value().data() + end * stride, out.data());
  const std::size_t offset = begin * stride;
  return Var::from_op(std::move(out), {x}, [offset](Node& n) {
    if (Tensor* g = n.parent_grad(0))
      for (std::size_t e = 0; e < n.grad.size(); ++e) (*g)[offset + e] += n.grad[e];
  });
}

Var global_avg_pool(const Var& x) {
  const int channels = leading(x.value());
  const std::size_t per = x.value().size() / channels;
  Tensor out(Shape{channels});
  for (int c = 0; c < channels; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) s += x.value()[c * per + i];
    out[c] = s / static_cast<double>(per);
  }
  return Var::from_op(std::move(out), {x}, [channels, per](Node& n) {
    if (Tensor* g = n.parent_grad(0))
      for (int c = 0; c < channels; ++c) {
        const double share = n.grad[c] / static_cast<double>(per);
        for (std::size_t i = 0; i < per; ++i) (*g)[c * per + i] += share;
      }
  });
}

Var rms_normalize(const Var& x, double eps) {
  const Tensor& v = x.value();
  const double n = static_cast<double>(v.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) sq += v[i] * v[i];
  const double r = std::sqrt(sq / n + eps);
  Tensor out = v;
  out *= 1.0 / r;
  return Var::from_op(out, {x}, [r, n, out](Node& node) {
    if (Tensor* g = node.parent_grad(0)) {
      double gy = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) gy += node.grad[i] * out[i];
      gy /= n;
      for (std::size_t i = 0; i < out.size(); ++i) (*g)[i] += (node.grad[i] - out[i] * gy) / r;
    }
  });
}

Var channel_scale(const Var& x, const Var& gain) {
  const int channels = leading(x.value());
  if (gain.value().rank() != 1 || gain.dim(0) != channels) {
    throw ShapeError("channel_scale: gain " + to_string(gain.shape()) + " vs input " + to_string(x.shape()));
  }
  const std::size_t per = x.value().size() / channels;
  Tensor out = x.value();
  for (int c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < per; ++i) out[c * per + i] *= gain.value()[c];
  return Var::from_op(std::move(out), {x, gain}, [channels, per](Node& n) {
    const Tensor& xv = n.parent_value(0);
    const Tensor& gv = n.parent_value(1);
    if (Tensor* g = n.parent_grad(0))
      for (int c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < per; ++i) (*g)[c * per + i] += n.grad[c * per + i] * gv[c];
    if (Tensor* g = n.parent_grad(1))
      for (int c = 0; c < channels; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < per; ++i) s += n.grad[c * per + i] * xv[c * per + i];
        (*g)[c] += s;
      }
  });
}

Var expand_cols(const Var& v, int cols) {
  require_rank(v, 1, "expand_cols");
  const int rows = v.dim(0);
  Tensor out(Shape{rows, cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at(r, c) = v.value()[r];
  return Var::from_op(std::move(out), {v}, [rows, cols](Node& n) {
    if (Tensor* g = n.parent_grad(0))
      for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < cols; ++c) s += n.grad.at(r, c);
        (*g)[r] += s;
      }
  });
}

Var rowwise_cosine(const Var& a, const Var& b, double eps) {
  require_rank(a, 2, "rowwise_cosine");
  require_same_shape(a.value(), b.value(), "rowwise_cosine");
  const int rows = a.dim(0), cols = a.dim(1);
  auto av = as_matrix(a.value(), rows, cols);
  auto bv = as_matrix(b.value(), rows, cols);
  Tensor out(Shape{rows});
  std::vector<double> dots(rows), na(rows), nb(rows);
  for (int r = 0; r < rows; ++r) {
    dots[r] = av.row(r).dot(bv.row(r));
    na[r] = av.row(r).norm();
    nb[r] = bv.row(r).norm();
    out[r] = (na[r] == 0.0 || nb[r] == 0.0) ? 0.0 : dots[r] / (na[r] * nb[r] + eps);
  }
  return Var::from_op(std::move(out), {a, b}, [=](Node& n) {
    auto a_m = as_matrix(n.parent_value(0), rows, cols);
    auto b_m = as_matrix(n.parent_value(1), rows, cols);
    Tensor* ga = n.parent_grad(0);
    Tensor* gb = n.parent_grad(1);
    for (int r = 0; r < rows; ++r) {
      if (na[r] == 0.0 || nb[r] == 0.0) continue;
      const double denom = na[r] * nb[r] + eps;
      const double g = n.grad[r];
      // d/da [a.b / (|a||b| + eps)] = b / D - (a.b) |b| a / (|a| D^2)
      if (ga) {
        auto ga_m = as_matrix(*ga, rows, cols);
        ga_m.row(r) += g * (b_m.row(r) / denom - (dots[r] * nb[r] / (na[r] * denom * denom)) * a_m.row(r));
      }
      if (gb) {
        auto gb_m = as_matrix(*gb, rows, cols);
        gb_m.row(r) += g * (a_m.row(r) / denom - (dots[r] * na[r] / (nb[r] * denom * denom)) * b_m.row(r));
      }
    }
  });
}

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  const int m = a.dim(0), k = a.dim(1), n_cols = b.dim(1);
  if (b.dim(0) != k) throw ShapeError("matmul: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  Tensor out(Shape{m, n_cols});
  as_matrix(out, m, n_cols).noalias() = as_matrix(a.value(), m, k) * as_matrix(b.value(), k, n_cols);
  return Var::from_op(std::move(out), {a, b}, [m, k, n_cols](Node& n) {
    auto g = as_matrix(static_cast<const Tensor&>(n.grad), m, n_cols);
    if (Tensor* ga = n.parent_grad(0))
      as_matrix(*ga, m, k).noalias() += g * as_matrix(n.parent_value(1), k, n_cols).transpose();
    if (Tensor* gb = n.parent_grad(1))
      as_matrix(*gb, k, n_cols).noalias() += as_matrix(n.parent_value(0), m, k).transpose() * g;
  });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const int rows = a.dim(0), cols = a.dim(1);
  Tensor out(Shape{cols, rows});
  as_matrix(out, cols, rows) = as_matrix(a.value(), rows, cols).transpose();
  return Var::from_op(std::move(out), {a}, [rows, cols](Node& n) {
    if (Tensor* g = n.parent_grad(0))
      as_matrix(*g, rows, cols) += as_matrix(static_cast<const Tensor&>(n.grad), cols, rows).transpose();
  });
}

Var softmax_rows(const Var& a) {
  require_rank(a, 2, "softmax_rows");
  const int rows = a.dim(0), cols = a.dim(1);
  Tensor out(Shape{rows, cols});
  for (int r = 0; r < rows; ++r) {
    double mx = a.value().at(r, 0);
    for (int c = 1; c < cols; ++c) mx = std::max(mx, a.value().at(r, c));
    double z = 0.0;
    for (int c = 0; c < cols; ++c) z += (out.at(r, c) = std::exp(a.value().at(r, c) - mx));
    for (int c = 0; c < cols; ++c) out.at(r, c) /= z;
  }
  return Var::from_op(std::move(out), {a}, [rows, cols](Node& n) {
    Tensor* g = n.parent_grad(0);
    if (!g) return;
    for (int r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < cols; ++c) dot += n.grad.at(r, c) * n.value.at(r, c);
      for (int c = 0; c < cols; ++c) g->at(r, c) += n.value.at(r, c) * (n.grad.at(r, c) - dot);
    }
  });
}

Var add_row_bias(const Var& x, const Var& bias) {
  require_rank(x, 2, "add_row_bias");
  const int rows = x.dim(0), cols = x.dim(1);
  if (bias.value().rank() != 1 || bias.dim(0) != cols) {
    throw ShapeError("add_row_bias: bias " + to_string(bias.shape()) + " vs " + to_string(x.shape()));
  }
  Tensor out = x.value();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at(r, c) += bias.value()[c];
  return Var::from_op(std::move(out), {x, bias}, [rows, cols](Node& n) {
    if (Tensor* g = n.parent_grad(0)) *g += n.grad;
    if (Tensor* g = n.parent_grad(1))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) (*g)[c] += n.grad.at(r, c);
  });
}

}  // namespace dsanet::ops
