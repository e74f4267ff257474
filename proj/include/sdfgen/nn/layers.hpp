#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sdfgen/nn/ops.hpp"

namespace sdfgen::nn {

using Rng = std::mt19937_64;

/// Centered normal samples with the given standard deviation.
Tensor normal_tensor(Shape shape, double stddev, Rng& rng);

inline constexpr double kInitStd = 0.02;

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

/// Everything a module owns, in declaration order: trainable parameters and
/// the full serializable state (parameters followed by buffers, per layer).
struct ModuleState {
  std::vector<Parameter*> params;
  std::vector<NamedTensor> tensors;

  void add(Parameter& p) {
    params.push_back(&p);
    tensors.push_back({p.name, &p.value});
  }
  void add_buffer(std::string name, Tensor& t) { tensors.push_back({std::move(name), &t}); }
  void append(const ModuleState& other) {
    params.insert(params.end(), other.params.begin(), other.params.end());
    tensors.insert(tensors.end(), other.tensors.begin(), other.tensors.end());
  }
};

/// FNV-1a over the raw bytes of every tensor in the state.
std::uint64_t checksum(const ModuleState& state);

class Linear {
 public:
  Linear(std::string name, std::size_t in, std::size_t out, Rng& rng);
  Var operator()(Tape& tape, Var x);
  void collect(ModuleState& state);

  Parameter weight;
  Parameter bias;
};

class Conv3d {
 public:
  Conv3d(std::string name, std::size_t in_channels, std::size_t out_channels, ConvGeometry geometry,
         Rng& rng);
  Var operator()(Tape& tape, Var x);
  void collect(ModuleState& state);

  ConvGeometry geometry;
  Parameter weight;  // [out, in, k, k, k]
  Parameter bias;
};

class UpConv3d {
 public:
  UpConv3d(std::string name, std::size_t in_channels, std::size_t out_channels, ConvGeometry geometry,
           Rng& rng);
  Var operator()(Tape& tape, Var x);
  void collect(ModuleState& state);

  ConvGeometry geometry;
  Parameter weight;  // [in, out, k, k, k]
  Parameter bias;
};

class BatchNorm {
 public:
  BatchNorm(std::string name, std::size_t channels);
  Var operator()(Tape& tape, Var x, const BatchNormOptions& options);
  void collect(ModuleState& state);

  Parameter gamma;
  Parameter beta;
  BatchNormStats stats;

 private:
  std::string name_;
};

/// Geometry that exactly doubles (upconv) or halves (conv) even spatial sizes
/// for an odd kernel: padding k/2, output padding stride - 1.
ConvGeometry doubling_geometry(std::size_t kernel);

}  // namespace sdfgen::nn
