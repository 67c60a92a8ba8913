#include "embanon/harness/bench.hpp"

#include <sys/resource.h>

#include <chrono>

#include "embanon/numerics/kernels.hpp"

namespace embanon::harness {

std::uint64_t peak_rss_bytes() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  // Linux reports kilobytes.
  return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024;
}

BenchResult bench(const Arm& arm, const data::Corpus& corpus, const BenchOptions& options) {
  std::vector<std::size_t> indices(options.n);
  for (std::size_t i = 0; i < options.n && !corpus.records.empty(); ++i) {
    indices[i] = i % corpus.records.size();
  }
  if (corpus.records.empty()) indices.clear();
  const data::Corpus input = data::subset(corpus, indices);

  const std::size_t previous = numerics::num_threads();
  numerics::set_num_threads(options.threads == 0 ? 1 : options.threads);
  const auto t0 = std::chrono::steady_clock::now();
  const data::Corpus out = arm.apply(input, options.batch == 0 ? 1 : options.batch);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  numerics::set_num_threads(previous);
  return {out.records.size(), seconds, peak_rss_bytes()};
}

}  // namespace embanon::harness
