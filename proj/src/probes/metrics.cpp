#include "embanon/probes/metrics.hpp"

#include <string>

#include "embanon/errors.hpp"

namespace embanon::probes {

Metrics metrics_from_confusion(std::vector<std::uint32_t> classes,
                               std::vector<std::vector<std::uint64_t>> confusion) {
  const std::size_t k = confusion.size();
  if (classes.size() != k) {
    throw ContractError("confusion matrix has " + std::to_string(k) +
                        " rows for " + std::to_string(classes.size()) + " classes");
  }
  std::vector<std::uint64_t> actual(k, 0), predicted(k, 0);
  std::uint64_t total = 0, correct = 0;
  for (std::size_t t = 0; t < k; ++t) {
    if (confusion[t].size() != k) throw ContractError("confusion matrix must be square");
    for (std::size_t p = 0; p < k; ++p) {
      actual[t] += confusion[t][p];
      predicted[p] += confusion[t][p];
      total += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  if (total == 0) throw ContractError("cannot score an empty evaluation set");

  Metrics m;
  m.classes = std::move(classes);
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  // Single-label classification: micro precision = micro recall = accuracy.
  m.micro_f1 = m.accuracy;
  m.precision.resize(k);
  m.recall.resize(k);
  m.f1.resize(k);
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double tp = static_cast<double>(confusion[c][c]);
    m.precision[c] = predicted[c] ? tp / static_cast<double>(predicted[c]) : 0.0;
    m.recall[c] = actual[c] ? tp / static_cast<double>(actual[c]) : 0.0;
    const double denom = m.precision[c] + m.recall[c];
    m.f1[c] = denom > 0.0 ? 2.0 * m.precision[c] * m.recall[c] / denom : 0.0;
    f1_sum += m.f1[c];
  }
  m.macro_f1 = k ? f1_sum / static_cast<double>(k) : 0.0;
  m.confusion = std::move(confusion);
  return m;
}

Metrics compute_metrics(std::span<const std::size_t> truth,
                        std::span<const std::size_t> predicted,
                        std::size_t n_classes) {
  if (truth.size() != predicted.size()) {
    throw ContractError("truth and prediction counts differ");
  }
  if (truth.empty()) throw ContractError("cannot score an empty evaluation set");
  std::vector<std::vector<std::uint64_t>> confusion(
      n_classes, std::vector<std::uint64_t>(n_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= n_classes || predicted[i] >= n_classes) {
      throw ContractError("class index outside [0, " + std::to_string(n_classes) + ")");
    }
    ++confusion[truth[i]][predicted[i]];
  }
  std::vector<std::uint32_t> classes(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) classes[c] = static_cast<std::uint32_t>(c);
  return metrics_from_confusion(std::move(classes), std::move(confusion));
}

}  // namespace embanon::probes
