#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "embanon/data/corpus.hpp"
#include "embanon/numerics/rng.hpp"

namespace embanon::data {

// Two utterances of the same content by different speakers.
struct ParallelPair {
  UtteranceEmbedding src;
  UtteranceEmbedding tgt;
};

// Index over the (content, speaker) cells realized in a corpus. Draws a
// content uniformly among those spoken by at least two speakers, then an
// ordered pair of distinct speakers uniformly, then one recording of each.
class PairSampler {
 public:
  explicit PairSampler(const Corpus& corpus);
  // Restricts sampling to the given record indices.
  PairSampler(const Corpus& corpus, std::span<const std::size_t> records);

  std::size_t eligible_contents() const { return contents_.size(); }

  // Record-index pairs (src, tgt).
  std::vector<std::array<std::size_t, 2>> sample_indices(std::size_t n,
                                                         numerics::Rng& rng) const;
  std::vector<ParallelPair> sample(std::size_t n, numerics::Rng& rng) const;

 private:
  struct ContentCell {
    // speakers[k] recorded the content in records[k] (one or more takes).
    std::vector<std::vector<std::size_t>> takes;
  };
  void build(std::span<const std::size_t> records);

  const Corpus* corpus_;
  std::vector<ContentCell> contents_;
};

// Throws UnsatisfiableError when no content has two speakers.
std::vector<ParallelPair> sample_parallel_pairs(const Corpus& corpus,
                                                std::size_t n,
                                                numerics::Rng& rng);

enum class SplitUnit {
  kUtterance,
  kSpeaker,
  // Utterance-level split performed independently within every speaker.
  kSpeakerStratified,
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

struct CorpusSplit {
  Corpus train, val, test;
};

// Disjoint, exhaustive partition by `ratios` (train, val, test). Parts with
// a zero ratio may be empty; a positive-ratio part that ends up empty is a
// SplitError. Indices inside each part keep corpus order.
SplitIndices split_indices(const Corpus& corpus, std::array<double, 3> ratios,
                           SplitUnit unit, std::uint64_t seed);
CorpusSplit split(const Corpus& corpus, std::array<double, 3> ratios,
                  SplitUnit unit, std::uint64_t seed);

}  // namespace embanon::data
