#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sdfgen/geometry.hpp"

namespace sdfgen::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  Tensor reshaped(Shape shape) const;
  void fill(double v);
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// A trainable array together with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad = Tensor(value.shape()); }
};

enum class GradMode { enabled, disabled };

/// Records a forward computation for one reverse sweep.
///
/// Nodes are stored in creation order, which is a topological order, so
/// `backward` walks them in reverse. A tape is single-use: a second
/// `backward` throws. Every recorded value is checked for NaN/Inf.
class Tape {
 public:
  struct Var {
    std::size_t id = 0;
  };

  /// Computes input gradients from the output gradient. `input_grads[i]` is
  /// null when input i does not need a gradient.
  using BackwardFn = std::function<void(const Tensor& out_grad, std::span<Tensor* const> input_grads)>;

  explicit Tape(GradMode mode = GradMode::enabled) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Input whose gradient is kept and readable through grad().
  Var leaf(Tensor value);
  /// Parameter node; backward() adds its gradient into `p.grad`.
  Var parameter(Parameter& p);

  Var record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn fn);

  const Tensor& value(Var v) const { return nodes_.at(v.id)->value; }
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id)->requires_grad; }
  bool grad_enabled() const { return mode_ == GradMode::enabled; }

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn fn;
  };

  Var push(std::unique_ptr<Node> node);

  GradMode mode_;
  bool consumed_ = false;
  std::vector<std::unique_ptr<Node>> nodes_;
};

using Var = Tape::Var;

}  // namespace sdfgen::nn
