#pragma once

#include <array>

#include "sdfgen/nn/tensor.hpp"

namespace sdfgen::nn {

/// Geometry of a cubic-kernel 3D convolution.
struct ConvGeometry {
  std::size_t kernel = 5;
  std::size_t stride = 2;
  std::size_t padding = 2;
  std::size_t output_padding = 0;  // transposed convolution only
};

/// floor((in + 2 pad - k) / stride) + 1; throws when the kernel does not fit.
std::size_t conv_output_size(std::size_t in, const ConvGeometry& g);
/// stride (in - 1) + k - 2 pad + output_padding.
std::size_t upconv_output_size(std::size_t in, const ConvGeometry& g);

// Elementwise and structural ops. All of them record onto `tape`.

Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
/// scale * x + shift.
Var affine(Tape& tape, Var x, double scale, double shift);
Var reshape(Tape& tape, Var x, Shape shape);
/// Concatenates two [N, C, ...] tensors along the channel axis.
Var concat_channels(Tape& tape, Var a, Var b);

Var relu(Tape& tape, Var x);
/// max(x, alpha x) for 0 < alpha < 1.
Var leaky_relu(Tape& tape, Var x, double alpha);
Var tanh(Tape& tape, Var x);
Var sigmoid(Tape& tape, Var x);
Var abs(Tape& tape, Var x);
/// log(clamp(x, eps, 1 - eps)); gradient is zero where the clamp is active.
Var log_clamped(Tape& tape, Var x, double eps);

Var sum(Tape& tape, Var x);
Var mean(Tape& tape, Var x);
/// Per-sample mean of an [N, ...] tensor -> [N].
Var mean_per_sample(Tape& tape, Var x);

/// x [N, in] * W^T [in, out] + b -> [N, out]; W has shape [out, in].
Var linear(Tape& tape, Var x, Var weight, Var bias);

/// Cross-correlation. x [N, Cin, D, H, W], weight [Cout, Cin, k, k, k], bias [Cout].
Var conv3d(Tape& tape, Var x, Var weight, Var bias, const ConvGeometry& g);

/// Transposed convolution: the adjoint of conv3d with the same geometry.
/// x [N, Cin, D, H, W], weight [Cin, Cout, k, k, k], bias [Cout].
Var upconv3d(Tape& tape, Var x, Var weight, Var bias, const ConvGeometry& g);

enum class Mode { train, eval };

/// Running statistics of one batch-norm layer.
struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
};

struct BatchNormOptions {
  Mode mode = Mode::train;
  bool update_running = true;  // train mode only
  double momentum = 0.9;       // running = momentum * running + (1 - momentum) * batch
  double eps = 1e-5;
};

/// Per-channel normalization over batch and spatial axes of [N, C, ...].
Var batchnorm(Tape& tape, Var x, Var gamma, Var beta, BatchNormStats& stats,
              const BatchNormOptions& options);

}  // namespace sdfgen::nn
