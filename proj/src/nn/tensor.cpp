#include "sdfgen/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sdfgen::nn {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw Error("Tensor: data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_string(shape_));
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw Error("Tensor::reshaped: cannot view " + shape_string(shape_) + " as " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tape::Var Tape::push(std::unique_ptr<Node> node) {
  if (consumed_) throw Error("Tape: cannot record after backward()");
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Tape::Var Tape::constant(Tensor value) {
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  return push(std::move(node));
}

Tape::Var Tape::leaf(Tensor value) {
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  node->requires_grad = grad_enabled();
  return push(std::move(node));
}

Tape::Var Tape::parameter(Parameter& p) {
  auto node = std::make_unique<Node>();
  node->value = p.value;
  node->requires_grad = grad_enabled();
  node->param = grad_enabled() ? &p : nullptr;
  return push(std::move(node));
}

Tape::Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn fn) {
  if (!value.all_finite()) throw Error(std::string("non-finite value produced by ") + op);
  auto node = std::make_unique<Node>();
  node->value = std::move(value);
  if (grad_enabled()) {
    for (auto v : inputs) node->requires_grad = node->requires_grad || nodes_.at(v.id)->requires_grad;
  }
  if (node->requires_grad) {
    node->fn = std::move(fn);
    for (auto v : inputs) node->inputs.push_back(v.id);
  }
  return push(std::move(node));
}

const Tensor& Tape::grad(Var v) const {
  const auto& node = *nodes_.at(v.id);
  if (!consumed_ || !node.requires_grad) throw Error("Tape::grad: no gradient recorded for this node");
  return node.grad;
}

void Tape::backward(Var loss) {
  if (consumed_) throw Error("Tape::backward: graph already consumed; run a new forward pass");
  Node& root = *nodes_.at(loss.id);
  if (root.value.numel() != 1) throw Error("Tape::backward: loss must be a scalar");
  consumed_ = true;
  if (!root.requires_grad) return;

  for (std::size_t i = 0; i <= loss.id; ++i) {
    if (nodes_[i]->requires_grad) nodes_[i]->grad = Tensor(nodes_[i]->value.shape());
  }
  root.grad[0] = 1.0;

  std::vector<Tensor*> input_grads;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = *nodes_[i];
    if (!node.requires_grad) continue;
    if (node.fn) {
      input_grads.clear();
      for (auto in : node.inputs) {
        Node& src = *nodes_[in];
        input_grads.push_back(src.requires_grad ? &src.grad : nullptr);
      }
      node.fn(node.grad, input_grads);
      // Intermediate storage is released as soon as it is no longer needed.
      node.fn = nullptr;
    }
    if (node.param) {
      auto& acc = node.param->grad;
      if (acc.shape() != node.value.shape()) acc = Tensor(node.value.shape());
      for (std::size_t k = 0; k < acc.numel(); ++k) acc[k] += node.grad[k];
    }
  }
}

}  // namespace sdfgen::nn
