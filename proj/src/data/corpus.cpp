#include "embanon/data/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "embanon/errors.hpp"

namespace embanon::data {

void Corpus::validate() const {
  if (layers == 0 || dim == 0) {
    throw DimensionError("corpus dimensions must be positive");
  }
  std::unordered_set<std::uint32_t> pool(speakers.begin(), speakers.end());
  if (pool.size() != speakers.size()) {
    throw DataError("speaker pool contains duplicate ids");
  }
  const std::size_t n = matrix_size();
  for (const UtteranceEmbedding& r : records) {
    if (r.matrix.size() != n) {
      throw DimensionError("utterance " + std::to_string(r.utterance_id) +
                           " has " + std::to_string(r.matrix.size()) +
                           " values, corpus expects " + std::to_string(n));
    }
    if (!pool.contains(r.speaker_id)) {
      throw DataError("utterance " + std::to_string(r.utterance_id) +
                      " has speaker " + std::to_string(r.speaker_id) +
                      " outside the speaker pool");
    }
    for (float v : r.matrix) {
      if (!std::isfinite(v)) {
        throw DataError("utterance " + std::to_string(r.utterance_id) +
                        " contains a non-finite value");
      }
    }
  }
}

Corpus subset(const Corpus& corpus, std::span<const std::size_t> indices) {
  Corpus out;
  out.layers = corpus.layers;
  out.dim = corpus.dim;
  out.records.reserve(indices.size());
  std::unordered_set<std::uint32_t> present;
  for (std::size_t i : indices) {
    if (i >= corpus.records.size()) {
      throw IndexError("subset: record index " + std::to_string(i) +
                       " out of range");
    }
    out.records.push_back(corpus.records[i]);
    present.insert(corpus.records[i].speaker_id);
  }
  for (std::uint32_t s : corpus.speakers) {
    if (present.contains(s)) out.speakers.push_back(s);
  }
  return out;
}

numerics::Tensor to_tensor(const Corpus& corpus,
                           std::span<const std::size_t> indices) {
  const std::size_t n = corpus.matrix_size();
  std::vector<double> values(indices.size() * n);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& m = corpus.records.at(indices[r]).matrix;
    if (m.size() != n) {
      throw DimensionError("to_tensor: record matrix size mismatch");
    }
    std::copy(m.begin(), m.end(), values.begin() + r * n);
  }
  return numerics::Tensor({indices.size(), corpus.layers, corpus.dim},
                          std::move(values));
}

numerics::Tensor to_tensor(const Corpus& corpus) {
  std::vector<std::size_t> all(corpus.records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return to_tensor(corpus, all);
}

Corpus with_matrices(const Corpus& corpus, const numerics::Tensor& values) {
  const numerics::Shape expected{corpus.records.size(), corpus.layers,
                                 corpus.dim};
  if (values.shape() != expected) {
    throw DimensionError("with_matrices: expected " +
                         numerics::shape_string(expected) + ", got " +
                         numerics::shape_string(values.shape()));
  }
  Corpus out = corpus;
  const std::size_t n = corpus.matrix_size();
  auto v = values.values();
  for (std::size_t r = 0; r < out.records.size(); ++r) {
    auto& m = out.records[r].matrix;
    for (std::size_t i = 0; i < n; ++i)
      m[i] = static_cast<float>(v[r * n + i]);
  }
  return out;
}

std::vector<double> pool_time_series(std::span<const double> frames,
                                     std::size_t dim) {
  if (dim == 0 || frames.size() % dim != 0) {
    throw DimensionError("pool_time_series: " + std::to_string(frames.size()) +
                         " values do not form rows of width " +
                         std::to_string(dim));
  }
  const std::size_t t = frames.size() / dim;
  if (t == 0) throw ContractError("pool_time_series: no frames to pool");
  std::vector<double> out(dim, 0.0);
  for (std::size_t f = 0; f < t; ++f)
    for (std::size_t j = 0; j < dim; ++j) out[j] += frames[f * dim + j];
  for (double& v : out) v /= static_cast<double>(t);
  return out;
}

}  // namespace embanon::data
