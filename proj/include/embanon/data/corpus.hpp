#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "embanon/numerics/tensor.hpp"

namespace embanon::data {

// One utterance: a layers x dim matrix of per-layer, time-pooled encoder
// features, stored row-major (layer-major) at float32.
struct UtteranceEmbedding {
  std::uint64_t utterance_id = 0;
  std::uint32_t speaker_id = 0;
  std::uint32_t content_id = 0;
  std::vector<float> matrix;

  bool operator==(const UtteranceEmbedding&) const = default;
};

struct Corpus {
  std::uint32_t layers = 12;
  std::uint32_t dim = 768;
  // Ordered speaker pool.
  std::vector<std::uint32_t> speakers;
  std::vector<UtteranceEmbedding> records;

  std::size_t matrix_size() const {
    return static_cast<std::size_t>(layers) * dim;
  }

  // Throws DataError / DimensionError when an invariant is broken.
  void validate() const;

  bool operator==(const Corpus&) const = default;
};

// Records at `indices` (in that order); the pool keeps only speakers that
// still occur, in their original order.
Corpus subset(const Corpus& corpus, std::span<const std::size_t> indices);

// Gathers the selected records into a [n x layers x dim] float64 tensor.
numerics::Tensor to_tensor(const Corpus& corpus,
                           std::span<const std::size_t> indices);
numerics::Tensor to_tensor(const Corpus& corpus);

// Replaces each record's matrix with rows from a [n x layers x dim] tensor,
// rounding to float32. Record metadata is preserved.
Corpus with_matrices(const Corpus& corpus, const numerics::Tensor& values);

// Arithmetic mean over the time axis of a frames x dim row-major block.
std::vector<double> pool_time_series(std::span<const double> frames,
                                     std::size_t dim);

}  // namespace embanon::data
