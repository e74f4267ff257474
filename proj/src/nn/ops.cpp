#include "sdfgen/nn/ops.hpp"

#include <Eigen/Core>
#include <cmath>

namespace sdfgen::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

using Dims3 = std::array<std::size_t, 3>;

void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                      " vs " + shape_string(b.shape()));
}

template <class F, class DF>
Var unary(Tape& tape, Var x, const char* op, F f, DF df) {
  const Tensor& in = tape.value(x);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = f(in[i]);
  Tape* t = &tape;
  return tape.record(op, std::move(out), {x},
                     [t, x, df](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       const Tensor& xin = t->value(x);
                       for (std::size_t i = 0; i < g.numel(); ++i) (*gi[0])[i] += g[i] * df(xin[i]);
                     });
}

// Gathers kernel-sized patches of image [C, in] into a (C k^3) x P matrix,
// where P enumerates the positions of the output grid `out`.
void im2col(const double* image, std::size_t channels, Dims3 in, const ConvGeometry& g, Dims3 out,
            double* cols) {
  const std::size_t k = g.kernel;
  const std::size_t positions = out[0] * out[1] * out[2];
  const long pad = static_cast<long>(g.padding);
  const long stride = static_cast<long>(g.stride);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = image + c * in[0] * in[1] * in[2];
    for (std::size_t kd = 0; kd < k; ++kd) {
      for (std::size_t kh = 0; kh < k; ++kh) {
        for (std::size_t kw = 0; kw < k; ++kw) {
          double* dst = cols + (((c * k + kd) * k + kh) * k + kw) * positions;
          for (std::size_t od = 0; od < out[0]; ++od) {
            const long id = static_cast<long>(od) * stride + static_cast<long>(kd) - pad;
            const bool dvalid = id >= 0 && id < static_cast<long>(in[0]);
            for (std::size_t oh = 0; oh < out[1]; ++oh) {
              const long ih = static_cast<long>(oh) * stride + static_cast<long>(kh) - pad;
              const bool hvalid = dvalid && ih >= 0 && ih < static_cast<long>(in[1]);
              double* row = dst + (od * out[1] + oh) * out[2];
              if (!hvalid) {
                std::fill(row, row + out[2], 0.0);
                continue;
              }
              const double* line = src + (static_cast<std::size_t>(id) * in[1] + static_cast<std::size_t>(ih)) * in[2];
              for (std::size_t ow = 0; ow < out[2]; ++ow) {
                const long iw = static_cast<long>(ow) * stride + static_cast<long>(kw) - pad;
                row[ow] = (iw >= 0 && iw < static_cast<long>(in[2])) ? line[iw] : 0.0;
              }
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds the columns back into image [C, in].
void col2im(const double* cols, std::size_t channels, Dims3 in, const ConvGeometry& g, Dims3 out,
            double* image) {
  const std::size_t k = g.kernel;
  const std::size_t positions = out[0] * out[1] * out[2];
  const long pad = static_cast<long>(g.padding);
  const long stride = static_cast<long>(g.stride);
  for (std::size_t c = 0; c < channels; ++c) {
    double* dst_img = image + c * in[0] * in[1] * in[2];
    for (std::size_t kd = 0; kd < k; ++kd) {
      for (std::size_t kh = 0; kh < k; ++kh) {
        for (std::size_t kw = 0; kw < k; ++kw) {
          const double* src = cols + (((c * k + kd) * k + kh) * k + kw) * positions;
          for (std::size_t od = 0; od < out[0]; ++od) {
            const long id = static_cast<long>(od) * stride + static_cast<long>(kd) - pad;
            if (id < 0 || id >= static_cast<long>(in[0])) continue;
            for (std::size_t oh = 0; oh < out[1]; ++oh) {
              const long ih = static_cast<long>(oh) * stride + static_cast<long>(kh) - pad;
              if (ih < 0 || ih >= static_cast<long>(in[1])) continue;
              const double* row = src + (od * out[1] + oh) * out[2];
              double* line = dst_img + (static_cast<std::size_t>(id) * in[1] + static_cast<std::size_t>(ih)) * in[2];
              for (std::size_t ow = 0; ow < out[2]; ++ow) {
                const long iw = static_cast<long>(ow) * stride + static_cast<long>(kw) - pad;
                if (iw >= 0 && iw < static_cast<long>(in[2])) line[iw] += row[ow];
              }
            }
          }
        }
      }
    }
  }
}

Dims3 spatial(const Tensor& t) { return {t.dim(2), t.dim(3), t.dim(4)}; }

std::size_t volume(Dims3 d) { return d[0] * d[1] * d[2]; }

// Sum over all axes except the channel axis (1) of an [N, C, ...] tensor.
void add_channel_sums(const Tensor& g, Tensor& bias_grad) {
  const std::size_t n = g.dim(0);
  const std::size_t c = g.dim(1);
  const std::size_t s = g.numel() / (n * c);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* p = g.data().data() + (b * c + ch) * s;
      double acc = 0.0;
      for (std::size_t i = 0; i < s; ++i) acc += p[i];
      bias_grad[ch] += acc;
    }
  }
}

}  // namespace

std::size_t conv_output_size(std::size_t in, const ConvGeometry& g) {
  require(g.stride >= 1 && g.kernel >= 1, "conv: kernel and stride must be positive");
  require(in + 2 * g.padding >= g.kernel, "conv: kernel larger than padded input");
  return (in + 2 * g.padding - g.kernel) / g.stride + 1;
}

std::size_t upconv_output_size(std::size_t in, const ConvGeometry& g) {
  require(in >= 1, "upconv: empty input");
  require(g.output_padding < g.stride, "upconv: output_padding must be smaller than stride");
  const long out = static_cast<long>(g.stride * (in - 1) + g.kernel + g.output_padding) -
                   2 * static_cast<long>(g.padding);
  require(out >= 1, "upconv: non-positive output size");
  return static_cast<std::size_t>(out);
}

Var add(Tape& tape, Var a, Var b) {
  const Tensor& va = tape.value(a);
  const Tensor& vb = tape.value(b);
  require_same_shape(va, vb, "add");
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = va[i] + vb[i];
  return tape.record("add", std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> gi) {
    for (int k = 0; k < 2; ++k) {
      if (!gi[k]) continue;
      for (std::size_t i = 0; i < g.numel(); ++i) (*gi[k])[i] += g[i];
    }
  });
}

Var sub(Tape& tape, Var a, Var b) {
  const Tensor& va = tape.value(a);
  const Tensor& vb = tape.value(b);
  require_same_shape(va, vb, "sub");
  Tensor out(va.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = va[i] - vb[i];
  return tape.record("sub", std::move(out), {a, b}, [](const Tensor& g, std::span<Tensor* const> gi) {
    if (gi[0]) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gi[0])[i] += g[i];
    }
    if (gi[1]) {
      for (std::size_t i = 0; i < g.numel(); ++i) (*gi[1])[i] -= g[i];
    }
  });
}

Var affine(Tape& tape, Var x, double scale, double shift) {
  return unary(
      tape, x, "affine", [=](double v) { return scale * v + shift; }, [=](double) { return scale; });
}

Var reshape(Tape& tape, Var x, Shape shape) {
  Tensor out = tape.value(x).reshaped(std::move(shape));
  return tape.record("reshape", std::move(out), {x}, [](const Tensor& g, std::span<Tensor* const> gi) {
    if (!gi[0]) return;
    for (std::size_t i = 0; i < g.numel(); ++i) (*gi[0])[i] += g[i];
  });
}

Var concat_channels(Tape& tape, Var a, Var b) {
  const Tensor& va = tape.value(a);
  const Tensor& vb = tape.value(b);
  require(va.rank() >= 2 && vb.rank() == va.rank() && va.dim(0) == vb.dim(0),
          "concat_channels: incompatible shapes");
  for (std::size_t i = 2; i < va.rank(); ++i) {
    require(va.dim(i) == vb.dim(i), "concat_channels: spatial shapes differ");
  }
  const std::size_t n = va.dim(0);
  const std::size_t ca = va.dim(1);
  const std::size_t cb = vb.dim(1);
  const std::size_t s = va.numel() / (n * ca);
  Shape shape = va.shape();
  shape[1] = ca + cb;
  Tensor out(shape);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(va.data().data() + i * ca * s, ca * s, out.data().data() + i * (ca + cb) * s);
    std::copy_n(vb.data().data() + i * cb * s, cb * s, out.data().data() + (i * (ca + cb) + ca) * s);
  }
  return tape.record("concat_channels", std::move(out), {a, b},
                     [n, ca, cb, s](const Tensor& g, std::span<Tensor* const> gi) {
                       for (std::size_t i = 0; i < n; ++i) {
                         const double* src = g.data().data() + i * (ca + cb) * s;
                         if (gi[0]) {
                           double* dst = gi[0]->data().data() + i * ca * s;
                           for (std::size_t k = 0; k < ca * s; ++k) dst[k] += src[k];
                         }
                         if (gi[1]) {
                           double* dst = gi[1]->data().data() + i * cb * s;
                           for (std::size_t k = 0; k < cb * s; ++k) dst[k] += src[ca * s + k];
                         }
                       }
                     });
}

Var relu(Tape& tape, Var x) {
  return unary(
      tape, x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Tape& tape, Var x, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, "leaky_relu: slope must be in (0, 1)");
  return unary(
      tape, x, "leaky_relu", [=](double v) { return v >= 0.0 ? v : alpha * v; },
      [=](double v) { return v >= 0.0 ? 1.0 : alpha; });
}

Var tanh(Tape& tape, Var x) {
  return unary(
      tape, x, "tanh", [](double v) { return std::tanh(v); },
      [](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
}

Var sigmoid(Tape& tape, Var x) {
  auto sig = [](double v) {
    // Split by sign to avoid overflow in exp.
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  };
  return unary(tape, x, "sigmoid", sig, [sig](double v) {
    const double s = sig(v);
    return s * (1.0 - s);
  });
}

Var abs(Tape& tape, Var x) {
  return unary(
      tape, x, "abs", [](double v) { return std::abs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var log_clamped(Tape& tape, Var x, double eps) {
  return unary(
      tape, x, "log",
      [=](double v) { return std::log(std::clamp(v, eps, 1.0 - eps)); },
      [=](double v) { return (v < eps || v > 1.0 - eps) ? 0.0 : 1.0 / v; });
}

Var sum(Tape& tape, Var x) {
  const Tensor& v = tape.value(x);
  double acc = 0.0;
  for (double e : v.data()) acc += e;
  return tape.record("sum", Tensor({1}, {acc}), {x}, [](const Tensor& g, std::span<Tensor* const> gi) {
    if (!gi[0]) return;
    for (auto& e : gi[0]->data()) e += g[0];
  });
}

Var mean(Tape& tape, Var x) {
  const Tensor& v = tape.value(x);
  require(v.numel() > 0, "mean: empty tensor");
  double acc = 0.0;
  for (double e : v.data()) acc += e;
  const double inv = 1.0 / static_cast<double>(v.numel());
  return tape.record("mean", Tensor({1}, {acc * inv}), {x},
                     [inv](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       for (auto& e : gi[0]->data()) e += g[0] * inv;
                     });
}

Var mean_per_sample(Tape& tape, Var x) {
  const Tensor& v = tape.value(x);
  require(v.rank() >= 1 && v.numel() > 0, "mean_per_sample: empty tensor");
  const std::size_t n = v.dim(0);
  const std::size_t per = v.numel() / n;
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < per; ++k) acc += v[i * per + k];
    out[i] = acc / static_cast<double>(per);
  }
  return tape.record("mean_per_sample", std::move(out), {x},
                     [n, per](const Tensor& g, std::span<Tensor* const> gi) {
                       if (!gi[0]) return;
                       const double inv = 1.0 / static_cast<double>(per);
                       for (std::size_t i = 0; i < n; ++i) {
                         for (std::size_t k = 0; k < per; ++k) (*gi[0])[i * per + k] += g[i] * inv;
                       }
                     });
}

Var linear(Tape& tape, Var x, Var weight, Var bias) {
  const Tensor& vx = tape.value(x);
  const Tensor& vw = tape.value(weight);
  const Tensor& vb = tape.value(bias);
  require(vx.rank() == 2 && vw.rank() == 2 && vb.rank() == 1, "linear: expected x[N,in], W[out,in], b[out]");
  const std::size_t n = vx.dim(0);
  const std::size_t in = vx.dim(1);
  const std::size_t out_dim = vw.dim(0);
  require(vw.dim(1) == in && vb.dim(0) == out_dim,
          "linear: shape mismatch x" + shape_string(vx.shape()) + " W" + shape_string(vw.shape()));
  Tensor out({n, out_dim});
  MatMap(out.data().data(), n, out_dim).noalias() =
      ConstMatMap(vx.data().data(), n, in) * ConstMatMap(vw.data().data(), out_dim, in).transpose();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out_dim; ++o) out[i * out_dim + o] += vb[o];
  }
  Tape* t = &tape;
  return tape.record("linear", std::move(out), {x, weight, bias},
                     [t, x, weight, n, in, out_dim](const Tensor& g, std::span<Tensor* const> gi) {
                       ConstMatMap gm(g.data().data(), n, out_dim);
                       if (gi[0]) {
                         MatMap(gi[0]->data().data(), n, in).noalias() +=
                             gm * ConstMatMap(t->value(weight).data().data(), out_dim, in);
                       }
                       if (gi[1]) {
                         MatMap(gi[1]->data().data(), out_dim, in).noalias() +=
                             gm.transpose() * ConstMatMap(t->value(x).data().data(), n, in);
                       }
                       if (gi[2]) {
                         for (std::size_t i = 0; i < n; ++i) {
                           for (std::size_t o = 0; o < out_dim; ++o) (*gi[2])[o] += g[i * out_dim + o];
                         }
                       }
                     });
}

Var conv3d(Tape& tape, Var x, Var weight, Var bias, const ConvGeometry& geo) {
  const Tensor& vx = tape.value(x);
  const Tensor& vw = tape.value(weight);
  const Tensor& vb = tape.value(bias);
  require(vx.rank() == 5, "conv3d: input must be [N, C, D, H, W], got " + shape_string(vx.shape()));
  const std::size_t k = geo.kernel;
  require(vw.rank() == 5 && vw.dim(1) == vx.dim(1) && vw.dim(2) == k && vw.dim(3) == k && vw.dim(4) == k,
          "conv3d: weight " + shape_string(vw.shape()) + " incompatible with input " + shape_string(vx.shape()));
  const std::size_t n = vx.dim(0);
  const std::size_t cin = vx.dim(1);
  const std::size_t cout = vw.dim(0);
  require(vb.rank() == 1 && vb.dim(0) == cout, "conv3d: bias shape mismatch");
  const Dims3 in = spatial(vx);
  const Dims3 outd{conv_output_size(in[0], geo), conv_output_size(in[1], geo), conv_output_size(in[2], geo)};
  const std::size_t pin = volume(in);
  const std::size_t pout = volume(outd);
  const std::size_t rows = cin * k * k * k;

  Tensor out({n, cout, outd[0], outd[1], outd[2]});
  std::vector<double> cols(rows * pout);
  ConstMatMap wm(vw.data().data(), cout, rows);
  for (std::size_t b = 0; b < n; ++b) {
    im2col(vx.data().data() + b * cin * pin, cin, in, geo, outd, cols.data());
    MatMap om(out.data().data() + b * cout * pout, cout, pout);
    om.noalias() = wm * ConstMatMap(cols.data(), rows, pout);
    for (std::size_t c = 0; c < cout; ++c) om.row(c).array() += vb[c];
  }

  Tape* t = &tape;
  return tape.record(
      "conv3d", std::move(out), {x, weight, bias},
      [t, x, weight, geo, n, cin, cout, in, outd, pin, pout, rows](const Tensor& g,
                                                                  std::span<Tensor* const> gi) {
        const Tensor& vx2 = t->value(x);
        ConstMatMap wm2(t->value(weight).data().data(), cout, rows);
        std::vector<double> cols2(rows * pout);
        RowMat dcols(rows, pout);
        for (std::size_t b = 0; b < n; ++b) {
          ConstMatMap gm(g.data().data() + b * cout * pout, cout, pout);
          if (gi[1]) {
            im2col(vx2.data().data() + b * cin * pin, cin, in, geo, outd, cols2.data());
            MatMap(gi[1]->data().data(), cout, rows).noalias() +=
                gm * ConstMatMap(cols2.data(), rows, pout).transpose();
          }
          if (gi[0]) {
            dcols.noalias() = wm2.transpose() * gm;
            col2im(dcols.data(), cin, in, geo, outd, gi[0]->data().data() + b * cin * pin);
          }
        }
        if (gi[2]) add_channel_sums(g, *gi[2]);
      });
}

Var upconv3d(Tape& tape, Var x, Var weight, Var bias, const ConvGeometry& geo) {
  const Tensor& vx = tape.value(x);
  const Tensor& vw = tape.value(weight);
  const Tensor& vb = tape.value(bias);
  require(vx.rank() == 5, "upconv3d: input must be [N, C, D, H, W], got " + shape_string(vx.shape()));
  const std::size_t k = geo.kernel;
  require(vw.rank() == 5 && vw.dim(0) == vx.dim(1) && vw.dim(2) == k && vw.dim(3) == k && vw.dim(4) == k,
          "upconv3d: weight " + shape_string(vw.shape()) + " incompatible with input " +
              shape_string(vx.shape()));
  const std::size_t n = vx.dim(0);
  const std::size_t cin = vx.dim(1);
  const std::size_t cout = vw.dim(1);
  require(vb.rank() == 1 && vb.dim(0) == cout, "upconv3d: bias shape mismatch");
  const Dims3 in = spatial(vx);
  const Dims3 outd{upconv_output_size(in[0], geo), upconv_output_size(in[1], geo),
                   upconv_output_size(in[2], geo)};
  for (int a = 0; a < 3; ++a) {
    require(conv_output_size(outd[a], geo) == in[a], "upconv3d: geometry is not invertible");
  }
  const std::size_t pin = volume(in);
  const std::size_t pout = volume(outd);
  const std::size_t rows = cout * k * k * k;

  Tensor out({n, cout, outd[0], outd[1], outd[2]});
  RowMat cols(rows, pin);
  ConstMatMap wm(vw.data().data(), cin, rows);
  for (std::size_t b = 0; b < n; ++b) {
    cols.noalias() = wm.transpose() * ConstMatMap(vx.data().data() + b * cin * pin, cin, pin);
    double* ob = out.data().data() + b * cout * pout;
    col2im(cols.data(), cout, outd, geo, in, ob);
    for (std::size_t c = 0; c < cout; ++c) {
      for (std::size_t i = 0; i < pout; ++i) ob[c * pout + i] += vb[c];
    }
  }

  Tape* t = &tape;
  return tape.record(
      "upconv3d", std::move(out), {x, weight, bias},
      [t, x, weight, geo, n, cin, cout, in, outd, pin, pout, rows](const Tensor& g,
                                                                  std::span<Tensor* const> gi) {
        const Tensor& vx2 = t->value(x);
        ConstMatMap wm2(t->value(weight).data().data(), cin, rows);
        std::vector<double> dcols(rows * pin);
        for (std::size_t b = 0; b < n; ++b) {
          if (!gi[0] && !gi[1]) break;
          im2col(g.data().data() + b * cout * pout, cout, outd, geo, in, dcols.data());
          ConstMatMap dm(dcols.data(), rows, pin);
          if (gi[0]) {
            MatMap(gi[0]->data().data() + b * cin * pin, cin, pin).noalias() += wm2 * dm;
          }
          if (gi[1]) {
            MatMap(gi[1]->data().data(), cin, rows).noalias() +=
                ConstMatMap(vx2.data().data() + b * cin * pin, cin, pin) * dm.transpose();
          }
        }
        if (gi[2]) add_channel_sums(g, *gi[2]);
      });
}

Var batchnorm(Tape& tape, Var x, Var gamma, Var beta, BatchNormStats& stats,
              const BatchNormOptions& options) {
  const Tensor& vx = tape.value(x);
  const Tensor& vg = tape.value(gamma);
  const Tensor& vbeta = tape.value(beta);
  require(vx.rank() >= 2, "batchnorm: input must be [N, C, ...]");
  const std::size_t n = vx.dim(0);
  const std::size_t c = vx.dim(1);
  const std::size_t s = vx.numel() / (n * c);
  const std::size_t m = n * s;
  require(vg.numel() == c && vbeta.numel() == c, "batchnorm: scale/shift size mismatch");
  if (stats.running_mean.numel() != c) {
    stats.running_mean = Tensor({c}, 0.0);
    stats.running_var = Tensor({c}, 1.0);
  }

  auto at = [&](std::size_t b, std::size_t ch, std::size_t i) { return (b * c + ch) * s + i; };
  Tensor out(vx.shape());

  if (options.mode == Mode::eval) {
    std::vector<double> inv_std(c);
    for (std::size_t ch = 0; ch < c; ++ch) {
      require(stats.running_var[ch] > 0.0, "batchnorm: running variance must be positive");
      inv_std[ch] = 1.0 / std::sqrt(stats.running_var[ch] + options.eps);
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < s; ++i) {
          const std::size_t idx = at(b, ch, i);
          out[idx] = vg[ch] * (vx[idx] - stats.running_mean[ch]) * inv_std[ch] + vbeta[ch];
        }
      }
    }
    Tape* t = &tape;
    return tape.record("batchnorm", std::move(out), {x, gamma, beta},
                       [t, x, gamma, n, c, s, inv_std, mean = stats.running_mean](
                           const Tensor& g, std::span<Tensor* const> gi) {
                         const Tensor& vx2 = t->value(x);
                         const Tensor& vg2 = t->value(gamma);
                         for (std::size_t ch = 0; ch < c; ++ch) {
                           for (std::size_t b = 0; b < n; ++b) {
                             for (std::size_t i = 0; i < s; ++i) {
                               const std::size_t idx = (b * c + ch) * s + i;
                               if (gi[0]) (*gi[0])[idx] += g[idx] * vg2[ch] * inv_std[ch];
                               if (gi[1]) (*gi[1])[ch] += g[idx] * (vx2[idx] - mean[ch]) * inv_std[ch];
                               if (gi[2]) (*gi[2])[ch] += g[idx];
                             }
                           }
                         }
                       });
  }

  require(m >= 2, "batchnorm: train mode needs at least two values per channel");
  Tensor xhat(vx.shape());
  std::vector<double> inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t i = 0; i < s; ++i) mu += vx[at(b, ch, i)];
    }
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t i = 0; i < s; ++i) {
        const double d = vx[at(b, ch, i)] - mu;
        var += d * d;
      }
    }
    var /= static_cast<double>(m);
    inv_std[ch] = 1.0 / std::sqrt(var + options.eps);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t i = 0; i < s; ++i) {
        const std::size_t idx = at(b, ch, i);
        xhat[idx] = (vx[idx] - mu) * inv_std[ch];
        out[idx] = vg[ch] * xhat[idx] + vbeta[ch];
      }
    }
    if (options.update_running) {
      const double unbiased = var * static_cast<double>(m) / static_cast<double>(m - 1);
      stats.running_mean[ch] = options.momentum * stats.running_mean[ch] + (1.0 - options.momentum) * mu;
      stats.running_var[ch] = options.momentum * stats.running_var[ch] + (1.0 - options.momentum) * unbiased;
    }
  }

  Tape* t = &tape;
  return tape.record(
      "batchnorm", std::move(out), {x, gamma, beta},
      [t, gamma, n, c, s, m, inv_std, xhat = std::move(xhat)](const Tensor& g,
                                                             std::span<Tensor* const> gi) {
        const Tensor& vg2 = t->value(gamma);
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_g = 0.0;
          double sum_gx = 0.0;
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t i = 0; i < s; ++i) {
              const std::size_t idx = (b * c + ch) * s + i;
              sum_g += g[idx];
              sum_gx += g[idx] * xhat[idx];
            }
          }
          if (gi[1]) (*gi[1])[ch] += sum_gx;
          if (gi[2]) (*gi[2])[ch] += sum_g;
          if (!gi[0]) continue;
          // dx = gamma * inv_std / m * (m g - sum(g) - xhat sum(g xhat))
          const double scale = vg2[ch] * inv_std[ch] * inv_m;
          for (std::size_t b = 0; b < n; ++b) {
            for (std::size_t i = 0; i < s; ++i) {
              const std::size_t idx = (b * c + ch) * s + i;
              (*gi[0])[idx] += scale * (static_cast<double>(m) * g[idx] - sum_g - xhat[idx] * sum_gx);
            }
          }
        }
      });
}

}  // namespace sdfgen::nn
