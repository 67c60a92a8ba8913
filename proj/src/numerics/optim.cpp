#include "embanon/numerics/optim.hpp"

#include <cmath>

#include "embanon/errors.hpp"

namespace embanon::numerics {

namespace {

void require_grads(std::span<Parameter> params) {
  for (const Parameter& p : params) {
    if (!p.tensor.has_grad()) {
      throw ContractError("optimizer step: parameter '" + p.name +
                          "' has no gradient");
    }
  }
}

}  // namespace

void zero_grad(std::span<Parameter> params) {
  for (Parameter& p : params) p.tensor.zero_grad();
}

void sgd_step(std::span<Parameter> params, double lr) {
  require_grads(params);
  for (Parameter& p : params) {
    auto values = p.tensor.mutable_values();
    auto grad = p.tensor.grad();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= lr * grad[i];
  }
}

AdamState::AdamState(std::span<const Parameter> params) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Parameter& p : params) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamState::step(std::span<Parameter> params, const AdamOptions& o) {
  if (params.size() != m_.size()) {
    throw ContractError("adam step: state tracks " + std::to_string(m_.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  require_grads(params);
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].tensor.mutable_values();
    auto grad = params[k].tensor.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    if (m.size() != values.size()) {
      throw ContractError("adam step: shape of '" + params[k].name +
                          "' changed since state creation");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * grad[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      values[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

}  // namespace embanon::numerics
