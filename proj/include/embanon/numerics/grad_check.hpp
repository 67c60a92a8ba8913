#pragma once

#include <functional>
#include <vector>

#include "embanon/numerics/tensor.hpp"

namespace embanon::numerics {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients of the scalar function `f` against central
// differences with respect to every element of every tensor in `inputs`.
// `f` must read the inputs through the same handles on every call. The
// error per element is |ga - gn| / max(1, |ga|, |gn|).
//
// Throws ContractError if f is not scalar or two evaluations disagree.
GradCheckResult grad_check_detailed(const std::function<Tensor()>& f,
                                    std::vector<Tensor> inputs,
                                    double step = 1e-5);

inline double grad_check(const std::function<Tensor()>& f,
                         std::vector<Tensor> inputs, double step = 1e-5) {
  return grad_check_detailed(f, std::move(inputs), step).max_relative_error;
}

// Restricts the check to a subset of flat element indices of one input;
// used on large parameter tensors where a full sweep is too slow.
GradCheckResult grad_check_elements(const std::function<Tensor()>& f,
                                    Tensor input,
                                    const std::vector<std::size_t>& elements,
                                    double step = 1e-5);

}  // namespace embanon::numerics
