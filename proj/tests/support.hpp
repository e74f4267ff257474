#pragma once

// Oracles shared by the unit tests and the acceptance runner. Everything here
// is written from first principles without touching the optimized paths.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "sdfgen/nn/layers.hpp"
#include "sdfgen/sdf_grid.hpp"

namespace support {

using sdfgen::nn::Shape;
using sdfgen::nn::Tape;
using sdfgen::nn::Tensor;
using sdfgen::nn::Var;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return acc;
}

/// f builds an output from leaf inputs; the check differentiates the scalar
/// <w, f(inputs)> for a fixed random w and compares every input gradient with
/// central differences. Returns ||analytic - numeric|| / (||analytic|| + ||numeric||).
using GraphFn = std::function<Var(Tape&, const std::vector<Var>&)>;

inline double gradient_check(const GraphFn& f, std::vector<Tensor> inputs, std::uint64_t seed,
                             double step = 1e-6) {
  std::mt19937_64 rng(seed);
  Tensor w;
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape tape(sdfgen::nn::GradMode::disabled);
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(tape.constant(x));
    const Tensor& out = tape.value(f(tape, vars));
    if (w.numel() == 0) w = random_tensor(out.shape(), rng);
    return dot(w, out);
  };
  evaluate(inputs);

  // <w, out> as a 1x1 linear layer.
  Tape tape;
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(tape.leaf(x));
  Var out = f(tape, vars);
  const std::size_t n = tape.value(out).numel();
  Var flat = sdfgen::nn::reshape(tape, out, {1, n});
  Var loss = sdfgen::nn::linear(tape, flat, tape.constant(w.reshaped({1, n})), tape.constant(Tensor({1})));
  tape.backward(sdfgen::nn::reshape(tape, loss, {1}));

  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor& analytic = tape.grad(vars[k]);
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      const double orig = inputs[k][i];
      inputs[k][i] = orig + step;
      const double up = evaluate(inputs);
      inputs[k][i] = orig - step;
      const double down = evaluate(inputs);
      inputs[k][i] = orig;
      const double numeric = (up - down) / (2 * step);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
  }
  const double denom = std::sqrt(a2) + std::sqrt(n2);
  return denom == 0.0 ? 0.0 : std::sqrt(diff2) / denom;
}

/// Seven nested loops, straight from the definition of cross-correlation.
inline Tensor naive_conv3d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                           std::size_t pad) {
  const std::size_t n = x.dim(0), cin = x.dim(1), d = x.dim(2), h = x.dim(3), wd = x.dim(4);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  const std::size_t od = (d + 2 * pad - k) / stride + 1, oh = (h + 2 * pad - k) / stride + 1,
                    ow = (wd + 2 * pad - k) / stride + 1;
  Tensor y({n, cout, od, oh, ow});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t z = 0; z < od; ++z)
        for (std::size_t yy = 0; yy < oh; ++yy)
          for (std::size_t xx = 0; xx < ow; ++xx) {
            double acc = b[co];
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t kz = 0; kz < k; ++kz)
                for (std::size_t ky = 0; ky < k; ++ky)
                  for (std::size_t kx = 0; kx < k; ++kx) {
                    const long iz = long(z * stride + kz) - long(pad);
                    const long iy = long(yy * stride + ky) - long(pad);
                    const long ix = long(xx * stride + kx) - long(pad);
                    if (iz < 0 || iy < 0 || ix < 0 || iz >= long(d) || iy >= long(h) || ix >= long(wd)) continue;
                    acc += w[(((co * cin + ci) * k + kz) * k + ky) * k + kx] *
                           x[(((s * cin + ci) * d + iz) * h + iy) * wd + ix];
                  }
            y[(((s * cout + co) * od + z) * oh + yy) * ow + xx] = acc;
          }
  return y;
}

/// Transposed convolution as zero-stuffing: insert stride-1 zeros between
/// inputs, pad by k-1-p (plus output padding on the high side) and run a
/// stride-1 convolution with the spatially flipped, channel-swapped kernel.
inline Tensor zero_stuff_upconv3d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                                  std::size_t pad, std::size_t out_pad) {
  const std::size_t n = x.dim(0), cin = x.dim(1), cout = w.dim(1), k = w.dim(2);
  std::array<std::size_t, 3> in{x.dim(2), x.dim(3), x.dim(4)};
  const std::size_t lo = k - 1 - pad;
  std::array<std::size_t, 3> st{};
  for (int a = 0; a < 3; ++a) st[a] = (in[a] - 1) * stride + 1 + 2 * lo + out_pad;
  Tensor stuffed({n, cin, st[0], st[1], st[2]});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t z = 0; z < in[0]; ++z)
        for (std::size_t y = 0; y < in[1]; ++y)
          for (std::size_t xx = 0; xx < in[2]; ++xx)
            stuffed[(((s * cin + c) * st[0] + lo + z * stride) * st[1] + lo + y * stride) * st[2] + lo + xx * stride] =
                x[(((s * cin + c) * in[0] + z) * in[1] + y) * in[2] + xx];
  Tensor flipped({cout, cin, k, k, k});
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t kz = 0; kz < k; ++kz)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx)
            flipped[(((co * cin + ci) * k + kz) * k + ky) * k + kx] =
                w[(((ci * cout + co) * k + (k - 1 - kz)) * k + (k - 1 - ky)) * k + (k - 1 - kx)];
  return naive_conv3d(stuffed, flipped, b, 1, 0);
}

/// O(N^2) DFT along every axis of an x-fastest volume.
inline std::vector<std::complex<double>> naive_dft3(const std::vector<double>& v, std::size_t n) {
  std::vector<std::complex<double>> out(n * n * n);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t kz = 0; kz < n; ++kz)
    for (std::size_t ky = 0; ky < n; ++ky)
      for (std::size_t kx = 0; kx < n; ++kx) {
        std::complex<double> acc = 0.0;
        for (std::size_t z = 0; z < n; ++z)
          for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) {
              const double phase = -two_pi * double(kx * x + ky * y + kz * z) / double(n);
              acc += v[x + n * (y + n * z)] * std::polar(1.0, phase);
            }
        out[kx + n * (ky + n * kz)] = acc;
      }
  return out;
}

inline sdfgen::SdfGrid analytic_sphere(std::size_t n, double radius) {
  auto g = sdfgen::SdfGrid::canonical(n);
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) g.at(x, y, z) = radius - sdfgen::norm(g.position(x, y, z));
  return g;
}

/// Exact signed distance to an axis-aligned box, positive inside.
inline double box_sdf(const sdfgen::Vec3& p, const sdfgen::Vec3& lo, const sdfgen::Vec3& hi) {
  double outside2 = 0.0;
  double inside = 1e300;
  for (int a = 0; a < 3; ++a) {
    const double below = lo[a] - p[a], above = p[a] - hi[a];
    const double d = std::max(below, above);
    if (d > 0) outside2 += d * d;
    inside = std::min(inside, -d);
  }
  return outside2 > 0 ? -std::sqrt(outside2) : inside;
}

}  // namespace support
