#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sdfgen/nn/tensor.hpp"

namespace sdfgen::nn {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// One bias-corrected Adam update of every parameter from its `grad`.
/// Moments are allocated on the first call; later calls must pass the same
/// parameter list (shapes are checked).
void adam_step(std::span<Parameter* const> params, AdamState& state);

void zero_grads(std::span<Parameter* const> params);

}  // namespace sdfgen::nn
