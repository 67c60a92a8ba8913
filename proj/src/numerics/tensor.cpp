#include "embanon/numerics/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "embanon/errors.hpp"

namespace embanon::numerics {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::vector<double>& detail::TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(values.size(), 0.0);
  return grad;
}

Tensor::Tensor() = default;

Tensor::Tensor(std::shared_ptr<detail::TensorImpl> impl)
    : impl_(std::move(impl)) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  for (std::size_t e : shape) {
    if (e == 0) {
      throw DimensionError("tensor extents must be positive, got " +
                           shape_string(shape));
    }
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value),
                requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::ndim() const { return impl_->shape.size(); }
std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for " + shape_string(impl_->shape));
  }
  return impl_->shape[axis];
}
std::size_t Tensor::numel() const { return impl_->values.size(); }

std::span<const double> Tensor::values() const { return impl_->values; }
std::span<double> Tensor::mutable_values() { return impl_->values; }

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("item() on non-scalar tensor " +
                        shape_string(shape()));
  }
  return impl_->values[0];
}

double Tensor::at(std::size_t flat_index) const {
  return impl_->values.at(flat_index);
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool flag) { impl_->requires_grad = flag; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }
std::span<double> Tensor::mutable_grad() { return impl_->ensure_grad(); }
void Tensor::zero_grad() { impl_->grad.clear(); }

Tensor Tensor::clone() const {
  Tensor t(impl_->shape, impl_->values, impl_->requires_grad);
  t.impl_->grad = impl_->grad;
  return t;
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->values); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values,
                           std::vector<Tensor> inputs,
                           detail::BackwardFn backward_fn) {
  Tensor out(std::move(shape), std::move(values));
  if (!g_grad_enabled) return out;
  bool track = false;
  for (const Tensor& in : inputs) track = track || in.requires_grad();
  if (!track) return out;
  out.impl_->requires_grad = true;
  out.impl_->backward_fn = std::move(backward_fn);
  out.impl_->parents.reserve(inputs.size());
  for (Tensor& in : inputs) out.impl_->parents.push_back(std::move(in.impl_));
  return out;
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(shape()));
  }
  if (!impl_->requires_grad) {
    throw ContractError("backward() on a tensor that does not require grad");
  }

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> visited;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::TensorImpl* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior nodes get fresh buffers per call so repeated backward() calls
  // accumulate exactly once more into the leaves.
  for (detail::TensorImpl* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->values.size(), 0.0);
  }
  impl_->ensure_grad()[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* node = *it;
    if (!node->is_leaf()) node->backward_fn(*node);
  }
  for (detail::TensorImpl* node : order) {
    if (!node->is_leaf()) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

}  // namespace embanon::numerics
