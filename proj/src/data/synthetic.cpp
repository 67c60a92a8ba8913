#include "embanon/data/synthetic.hpp"

#include <cmath>

#include "embanon/errors.hpp"
#include "embanon/numerics/rng.hpp"

namespace embanon::data {

using numerics::Rng;
using numerics::derive_seed;

void SyntheticConfig::validate() const {
  if (n_speakers < 2) throw ConfigError("synthetic corpus needs >= 2 speakers");
  if (n_contents < 1 || layers < 1 || dim < 1 || speaker_latent < 1 ||
      content_latent < 1) {
    throw ConfigError("synthetic corpus sizes must be positive");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("noise_sigma must be finite and non-negative");
  }
}

SyntheticFactors synthetic_factors(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::size_t p = cfg.speaker_latent, q = cfg.content_latent;
  SyntheticFactors f;

  Rng spk_rng(derive_seed(cfg.seed, 1));
  f.speaker_latents.assign(cfg.n_speakers, std::vector<double>(p));
  for (auto& s : f.speaker_latents)
    for (double& v : s) v = spk_rng.normal();

  Rng content_rng(derive_seed(cfg.seed, 2));
  f.content_latents.assign(cfg.n_contents, std::vector<double>(q));
  for (auto& c : f.content_latents)
    for (double& v : c) v = content_rng.normal();

  // Std 1/sqrt(p+q) gives unit-variance embedding entries.
  const double map_std = 1.0 / std::sqrt(static_cast<double>(p + q));
  Rng map_rng(derive_seed(cfg.seed, 3));
  f.speaker_maps.resize(cfg.layers);
  f.content_maps.resize(cfg.layers);
  for (std::uint32_t l = 0; l < cfg.layers; ++l) {
    f.speaker_maps[l].resize(cfg.dim * p);
    for (double& v : f.speaker_maps[l]) v = map_std * map_rng.normal();
    f.content_maps[l].resize(cfg.dim * q);
    for (double& v : f.content_maps[l]) v = map_std * map_rng.normal();
  }
  return f;
}

std::vector<double> synthetic_matrix(const SyntheticConfig& cfg,
                                     const SyntheticFactors& f,
                                     std::uint32_t k, std::uint32_t m) {
  const std::size_t p = cfg.speaker_latent, q = cfg.content_latent;
  const std::size_t d = cfg.dim;
  // Per-cell noise stream so a record does not depend on draw order.
  const std::uint64_t utt = static_cast<std::uint64_t>(k) * cfg.n_contents + m;
  Rng noise(derive_seed(cfg.seed, 1000 + utt));
  std::vector<double> out(cfg.layers * d);
  for (std::uint32_t l = 0; l < cfg.layers; ++l) {
    const auto& ws = f.speaker_maps[l];
    const auto& wc = f.content_maps[l];
    for (std::size_t i = 0; i < d; ++i) {
      double v = 0.0;
      for (std::size_t j = 0; j < p; ++j) v += ws[i * p + j] * f.speaker_latents[k][j];
      for (std::size_t j = 0; j < q; ++j) v += wc[i * q + j] * f.content_latents[m][j];
      if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * noise.normal();
      out[l * d + i] = v;
    }
  }
  return out;
}

Corpus generate_synthetic(const SyntheticConfig& cfg) {
  const SyntheticFactors f = synthetic_factors(cfg);
  Corpus c;
  c.layers = cfg.layers;
  c.dim = cfg.dim;
  for (std::uint32_t k = 0; k < cfg.n_speakers; ++k)
    c.speakers.push_back(cfg.speaker_id_base + k);
  c.records.reserve(static_cast<std::size_t>(cfg.n_speakers) * cfg.n_contents);
  for (std::uint32_t k = 0; k < cfg.n_speakers; ++k) {
    for (std::uint32_t m = 0; m < cfg.n_contents; ++m) {
      const std::vector<double> values = synthetic_matrix(cfg, f, k, m);
      UtteranceEmbedding u;
      u.utterance_id = static_cast<std::uint64_t>(k) * cfg.n_contents + m;
      u.speaker_id = cfg.speaker_id_base + k;
      u.content_id = m;
      u.matrix.assign(values.begin(), values.end());
      c.records.push_back(std::move(u));
    }
  }
  return c;
}

}  // namespace embanon::data
