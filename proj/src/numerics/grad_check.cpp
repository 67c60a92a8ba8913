#include "embanon/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "embanon/errors.hpp"

namespace embanon::numerics {

namespace {

double evaluate(const std::function<Tensor()>& f) {
  NoGradGuard guard;
  Tensor out = f();
  if (out.numel() != 1) {
    throw ContractError("grad_check: function must be scalar-valued, got " +
                        shape_string(out.shape()));
  }
  return out.item();
}

std::vector<std::vector<double>> analytic_grads(
    const std::function<Tensor()>& f, std::vector<Tensor>& inputs) {
  for (Tensor& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  const double a = evaluate(f);
  const double b = evaluate(f);
  if (a != b) {
    throw ContractError(
        "grad_check: function is non-deterministic (two forward passes "
        "differ)");
  }
  Tensor loss = f();
  loss.backward();
  std::vector<std::vector<double>> grads;
  for (Tensor& t : inputs) {
    if (t.has_grad()) {
      grads.emplace_back(t.grad().begin(), t.grad().end());
    } else {
      grads.emplace_back(t.numel(), 0.0);
    }
    t.zero_grad();
  }
  return grads;
}

void compare(const std::function<Tensor()>& f, Tensor& input,
             std::size_t input_index, std::size_t element, double analytic,
             double step, GradCheckResult& result) {
  auto values = input.mutable_values();
  const double saved = values[element];
  values[element] = saved + step;
  const double plus = evaluate(f);
  values[element] = saved - step;
  const double minus = evaluate(f);
  values[element] = saved;
  const double numeric = (plus - minus) / (2.0 * step);
  const double denom =
      std::max({1.0, std::abs(analytic), std::abs(numeric)});
  const double err = std::abs(analytic - numeric) / denom;
  if (err >= result.max_relative_error) {
    result.max_relative_error = err;
    result.worst_input = input_index;
    result.worst_element = element;
    result.analytic = analytic;
    result.numeric = numeric;
  }
}

}  // namespace

GradCheckResult grad_check_detailed(const std::function<Tensor()>& f,
                                    std::vector<Tensor> inputs, double step) {
  auto grads = analytic_grads(f, inputs);
  GradCheckResult result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (std::size_t i = 0; i < inputs[t].numel(); ++i) {
      compare(f, inputs[t], t, i, grads[t][i], step, result);
    }
  }
  return result;
}

GradCheckResult grad_check_elements(const std::function<Tensor()>& f,
                                    Tensor input,
                                    const std::vector<std::size_t>& elements,
                                    double step) {
  std::vector<Tensor> inputs{input};
  auto grads = analytic_grads(f, inputs);
  GradCheckResult result;
  for (std::size_t i : elements) {
    if (i >= input.numel()) {
      throw IndexError("grad_check_elements: element " + std::to_string(i) +
                       " out of range");
    }
    compare(f, inputs[0], 0, i, grads[0][i], step, result);
  }
  return result;
}

}  // namespace embanon::numerics
