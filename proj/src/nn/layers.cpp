#include "sdfgen/nn/layers.hpp"

#include <bit>

namespace sdfgen::nn {

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

std::uint64_t checksum(const ModuleState& state) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& nt : state.tensors) {
    for (double v : nt.tensor->data()) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) {
        h ^= (bits >> (8 * b)) & 0xFF;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

ConvGeometry doubling_geometry(std::size_t kernel) {
  if (kernel % 2 == 0) throw Error("doubling_geometry: kernel must be odd");
  return ConvGeometry{kernel, 2, kernel / 2, 1};
}

Linear::Linear(std::string name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + ".weight", normal_tensor({out, in}, kInitStd, rng)),
      bias(name + ".bias", Tensor({out})) {}

Var Linear::operator()(Tape& tape, Var x) {
  return linear(tape, x, tape.parameter(weight), tape.parameter(bias));
}

void Linear::collect(ModuleState& state) {
  state.add(weight);
  state.add(bias);
}

Conv3d::Conv3d(std::string name, std::size_t in_channels, std::size_t out_channels,
               ConvGeometry g, Rng& rng)
    : geometry(g),
      weight(name + ".weight",
             normal_tensor({out_channels, in_channels, g.kernel, g.kernel, g.kernel}, kInitStd, rng)),
      bias(name + ".bias", Tensor({out_channels})) {
  geometry.output_padding = 0;
}

Var Conv3d::operator()(Tape& tape, Var x) {
  return conv3d(tape, x, tape.parameter(weight), tape.parameter(bias), geometry);
}

void Conv3d::collect(ModuleState& state) {
  state.add(weight);
  state.add(bias);
}

UpConv3d::UpConv3d(std::string name, std::size_t in_channels, std::size_t out_channels,
                   ConvGeometry g, Rng& rng)
    : geometry(g),
      weight(name + ".weight",
             normal_tensor({in_channels, out_channels, g.kernel, g.kernel, g.kernel}, kInitStd, rng)),
      bias(name + ".bias", Tensor({out_channels})) {}

Var UpConv3d::operator()(Tape& tape, Var x) {
  return upconv3d(tape, x, tape.parameter(weight), tape.parameter(bias), geometry);
}

void UpConv3d::collect(ModuleState& state) {
  state.add(weight);
  state.add(bias);
}

BatchNorm::BatchNorm(std::string name, std::size_t channels)
    : gamma(name + ".gamma", Tensor({channels}, 1.0)),
      beta(name + ".beta", Tensor({channels}, 0.0)),
      stats{Tensor({channels}, 0.0), Tensor({channels}, 1.0)},
      name_(std::move(name)) {}

Var BatchNorm::operator()(Tape& tape, Var x, const BatchNormOptions& options) {
  return batchnorm(tape, x, tape.parameter(gamma), tape.parameter(beta), stats, options);
}

void BatchNorm::collect(ModuleState& state) {
  state.add(gamma);
  state.add(beta);
  state.add_buffer(name_ + ".running_mean", stats.running_mean);
  state.add_buffer(name_ + ".running_var", stats.running_var);
}

}  // namespace sdfgen::nn
