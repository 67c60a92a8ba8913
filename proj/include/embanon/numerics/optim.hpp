#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "embanon/numerics/tensor.hpp"

namespace embanon::numerics {

struct Parameter {
  std::string name;
  Tensor tensor;
};

void zero_grad(std::span<Parameter> params);

// p <- p - lr * grad for every parameter. Grads are left in place.
void sgd_step(std::span<Parameter> params, double lr);

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam moments, bound to one parameter list by position.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(std::span<const Parameter> params);

  void step(std::span<Parameter> params, const AdamOptions& options);

  std::uint64_t steps() const { return step_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

 private:
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

inline void adam_step(std::span<Parameter> params, AdamState& state,
                      const AdamOptions& options = {}) {
  state.step(params, options);
}

}  // namespace embanon::numerics
