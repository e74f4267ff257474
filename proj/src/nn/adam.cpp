#include "sdfgen/nn/adam.hpp"

#include <cmath>

namespace sdfgen::nn {

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->value.shape());
      state.second_moment.emplace_back(p->value.shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw Error("adam_step: optimizer state holds " + std::to_string(state.first_moment.size()) +
                " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    if (p.grad.shape() != p.value.shape() || state.first_moment[i].shape() != p.value.shape()) {
      throw Error("adam_step: shape mismatch for parameter " + p.name);
    }
  }

  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < p.value.numel(); ++k) {
      const double g = p.grad[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p.value[k] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void zero_grads(std::span<Parameter* const> params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace sdfgen::nn
