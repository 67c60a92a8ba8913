#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "embanon/numerics/rng.hpp"
#include "embanon/numerics/tensor.hpp"

namespace embanon::numerics {

// a[m x k] * b[k x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// Element-wise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// x[..., n] + bias[n]; the only broadcast the library supports.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// Same values, new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

Tensor concat_last(std::span<const Tensor> parts);
Tensor concat_last(std::initializer_list<Tensor> parts);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor softmax_last(const Tensor& x);

// Subgradient at 0 is 0.
Tensor relu(const Tensor& x);

// Rows of table[V x e] selected by ids -> [ids.size() x e]. Gradients
// scatter-add, so repeated ids accumulate.
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

// Mean over all elements of (pred - target)^2.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Mean softmax cross-entropy of logits[B x C] against class indices.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

// Inverted dropout. Identity when !train or p == 0.
Tensor dropout(const Tensor& x, double p, bool train, Rng& rng);

// Scaled dot-product self-attention with `heads` heads. q, k, v are
// [batch*seq x model_dim]; each group of `seq` consecutive rows attends only
// within itself. Scores are scaled by 1/sqrt(model_dim / heads).
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t batch, std::size_t seq,
                            std::size_t heads);

// x[B x L x d], weights[L] -> [B x d], out[b] = sum_l weights[l] * x[b, l].
Tensor weighted_layer_sum(const Tensor& x, const Tensor& weights);

}  // namespace embanon::numerics
