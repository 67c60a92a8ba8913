#pragma once

#include <cstdint>

#include "embanon/data/corpus.hpp"
#include "embanon/numerics/rng.hpp"
#include "embanon/numerics/tensor.hpp"

namespace embanon::baselines {

struct LaplaceConfig {
  double epsilon = 15.0;
  double clip_lo = -1.0;
  double clip_hi = 1.0;
  std::uint64_t seed = 0;

  // Noise scale b = (clip_hi - clip_lo) / epsilon.
  double scale() const { return (clip_hi - clip_lo) / epsilon; }
  // Throws ConfigError.
  void validate() const;
};

// Inverse CDF of Lap(0, b) at u in (-0.5, 0.5).
double laplace_from_uniform(double u, double b);
double sample_laplace(double b, numerics::Rng& rng);
// CDF of Lap(0, b).
double laplace_cdf(double x, double b);

// Clips every element to [clip_lo, clip_hi], then adds an independent
// Lap(scale) draw; no clipping after noise. DataError on non-finite input.
numerics::Tensor laplace_anonymize(const numerics::Tensor& z, const LaplaceConfig& cfg);
numerics::Tensor laplace_anonymize(const numerics::Tensor& z, const LaplaceConfig& cfg,
                                   numerics::Rng& rng);
data::Corpus laplace_anonymize(const data::Corpus& corpus, const LaplaceConfig& cfg);

}  // namespace embanon::baselines
