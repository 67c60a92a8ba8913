#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace embanon::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorImpl;
using BackwardFn = std::function<void(const TensorImpl& out)>;

struct TensorImpl {
  Shape shape;
  std::vector<double> values;
  // Empty until a gradient is first written.
  std::vector<double> grad;
  bool requires_grad = false;
  // Set on tensors produced by a recorded op; leaves have none.
  std::vector<std::shared_ptr<TensorImpl>> parents;
  BackwardFn backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& ensure_grad();
};

}  // namespace detail

// Dense row-major float64 array with optional reverse-mode tracking.
//
// A Tensor is a handle: copies share storage and graph position. Use clone()
// for an independent copy. Ops that see at least one input with
// requires_grad() record a backward closure on their output; backward() on a
// scalar replays those closures in reverse topological order and accumulates
// into the grad buffers of leaf tensors.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const;
  std::size_t ndim() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Writes bypass the tape; only use on leaves or outside a recorded graph.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat_index) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  Tensor clone() const;
  Tensor detach() const;

  // Requires a scalar tensor. Leaf grads accumulate across calls.
  void backward() const;

  bool defined() const { return static_cast<bool>(impl_); }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  // Builder for op implementations.
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs,
                            detail::BackwardFn backward_fn);

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl);
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Scoped switch that stops ops from recording closures on this thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

}  // namespace embanon::numerics
