#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace embanon::probes {

struct Metrics {
  // Label value of each class row/column.
  std::vector<std::uint32_t> classes;
  // confusion[true][predicted].
  std::vector<std::vector<std::uint64_t>> confusion;
  double accuracy = 0.0;
  // Unweighted mean of per-class F1; a class never predicted and never
  // present scores 0.
  double macro_f1 = 0.0;
  double micro_f1 = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;

  bool operator==(const Metrics&) const = default;
};

// All scalar fields are derived from the confusion matrix alone.
Metrics metrics_from_confusion(std::vector<std::uint32_t> classes,
                               std::vector<std::vector<std::uint64_t>> confusion);

// truth and predicted hold class indices in [0, n_classes). Throws
// ContractError on empty or mismatched input.
Metrics compute_metrics(std::span<const std::size_t> truth,
                        std::span<const std::size_t> predicted,
                        std::size_t n_classes);

}  // namespace embanon::probes
