#pragma once

#include <cstdint>

#include "embanon/data/corpus.hpp"

namespace embanon::data {

// Linear latent-factor stand-in for a pretrained encoder: every
// (speaker, content) cell yields one L x d record whose layer rows mix a
// speaker latent and a content latent through per-layer random maps.
struct SyntheticConfig {
  std::uint32_t n_speakers = 40;
  std::uint32_t n_contents = 200;
  std::uint32_t layers = 4;
  std::uint32_t dim = 32;
  std::uint32_t speaker_latent = 8;
  std::uint32_t content_latent = 8;
  double noise_sigma = 0.05;
  std::uint64_t seed = 0;
  // First speaker id; ids are consecutive from here.
  std::uint32_t speaker_id_base = 100;

  void validate() const;
};

struct SyntheticFactors {
  // [n_speakers][p], [n_contents][q]
  std::vector<std::vector<double>> speaker_latents;
  std::vector<std::vector<double>> content_latents;
  // [layer] -> d x p and d x q, row-major.
  std::vector<std::vector<double>> speaker_maps;
  std::vector<std::vector<double>> content_maps;
};

// The latent draws behind generate_synthetic for the same config.
SyntheticFactors synthetic_factors(const SyntheticConfig& cfg);

// Float64 layer-major matrix of cell (speaker index k, content m), noise
// included; generate_synthetic rounds exactly these values to float32.
std::vector<double> synthetic_matrix(const SyntheticConfig& cfg,
                                     const SyntheticFactors& factors,
                                     std::uint32_t k, std::uint32_t m);

// Records are ordered speaker-major; utterance_id = speaker * n_contents +
// content. Bitwise reproducible from cfg.
Corpus generate_synthetic(const SyntheticConfig& cfg);

}  // namespace embanon::data
