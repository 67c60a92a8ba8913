#pragma once

#include <cstddef>
#include <cstdint>

#include "embanon/data/corpus.hpp"
#include "embanon/harness/experiment.hpp"

namespace embanon::harness {

struct BenchOptions {
  std::size_t n = 500;
  std::size_t batch = 1;
  std::size_t threads = 4;
};

struct BenchResult {
  std::size_t utterances = 0;
  double seconds = 0.0;
  // Process peak resident set size at the end of the run.
  std::uint64_t peak_rss_bytes = 0;

  double seconds_per_utterance() const {
    return utterances == 0 ? 0.0 : seconds / static_cast<double>(utterances);
  }
};

// Times only the anonymization of the first n records of `corpus` (cycled
// when the corpus is smaller), with the kernel thread cap set to `threads`
// for the duration of the run.
BenchResult bench(const Arm& arm, const data::Corpus& corpus,
                  const BenchOptions& options = {});

// Process peak RSS in bytes (getrusage high-water mark).
std::uint64_t peak_rss_bytes();

}  // namespace embanon::harness
