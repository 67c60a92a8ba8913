#include "embanon/baselines/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "embanon/errors.hpp"

namespace embanon::baselines {

void LaplaceConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("laplace epsilon must be positive");
  if (!(clip_lo < clip_hi) || !std::isfinite(clip_lo) || !std::isfinite(clip_hi)) {
    throw ConfigError("laplace clip range must be finite with clip_lo < clip_hi");
  }
}

double laplace_from_uniform(double u, double b) {
  if (u == 0.0) return 0.0;
  const double sign = u > 0.0 ? 1.0 : -1.0;
  return -b * sign * std::log1p(-2.0 * std::abs(u));
}

double sample_laplace(double b, numerics::Rng& rng) {
  // uniform_open excludes both ends, so |u| < 0.5 and the log stays finite.
  return laplace_from_uniform(rng.uniform_open() - 0.5, b);
}

double laplace_cdf(double x, double b) {
  return x < 0.0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
}

numerics::Tensor laplace_anonymize(const numerics::Tensor& z, const LaplaceConfig& cfg,
                                   numerics::Rng& rng) {
  cfg.validate();
  const double b = cfg.scale();
  std::vector<double> out(z.values().begin(), z.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) {
      throw DataError("non-finite embedding value at element " + std::to_string(i));
    }
    out[i] = std::clamp(out[i], cfg.clip_lo, cfg.clip_hi) + sample_laplace(b, rng);
  }
  return numerics::Tensor(z.shape(), std::move(out));
}

numerics::Tensor laplace_anonymize(const numerics::Tensor& z, const LaplaceConfig& cfg) {
  numerics::Rng rng(cfg.seed);
  return laplace_anonymize(z, cfg, rng);
}

data::Corpus laplace_anonymize(const data::Corpus& corpus, const LaplaceConfig& cfg) {
  cfg.validate();
  numerics::Rng rng(cfg.seed);
  const double b = cfg.scale();
  data::Corpus out = corpus;
  for (auto& r : out.records) {
    for (float& v : r.matrix) {
      if (!std::isfinite(v)) {
        throw DataError("non-finite embedding value in utterance " +
                        std::to_string(r.utterance_id));
      }
      const double clipped = std::clamp(static_cast<double>(v), cfg.clip_lo, cfg.clip_hi);
      v = static_cast<float>(clipped + sample_laplace(b, rng));
    }
  }
  return out;
}

}  // namespace embanon::baselines
