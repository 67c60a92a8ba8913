#pragma once

#include <cstdint>
#include <vector>

#include "embanon/data/corpus.hpp"
#include "embanon/data/manifest.hpp"
#include "embanon/data/sampling.hpp"
#include "embanon/numerics/optim.hpp"
#include "embanon/numerics/tensor.hpp"
#include "embanon/probes/metrics.hpp"

namespace embanon::probes {

using numerics::Parameter;
using numerics::Tensor;

enum class LayerWeighting {
  // Layer weights are softmax(logits): a convex combination.
  kSoftmax,
  // Logits are used directly as unconstrained weights.
  kRaw,
};

struct ProbeConfig {
  std::vector<std::size_t> hidden = {256, 128};
  double lr = 1e-3;
  std::uint32_t epochs = 50;
  std::uint32_t patience = 5;
  std::size_t batch = 64;
  LayerWeighting weighting = LayerWeighting::kSoftmax;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Learnable layer fusion followed by an MLP with ReLU between layers.
class ProbeModel {
 public:
  ProbeModel(std::uint32_t layers, std::uint32_t dim, std::vector<std::uint32_t> classes,
             const ProbeConfig& config);

  std::uint32_t layers() const { return layers_; }
  std::uint32_t dim() const { return dim_; }
  // Sorted label values; output column i scores classes()[i].
  const std::vector<std::uint32_t>& classes() const { return classes_; }
  LayerWeighting weighting() const { return weighting_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  const Tensor& featurizer_logits() const { return params_[0].tensor; }

  // Current per-layer weights (a probability vector under kSoftmax).
  Tensor layer_weights() const;
  // z[B x L x d] -> [B x d].
  Tensor featurize(const Tensor& z) const;
  // z[B x L x d] -> class scores [B x n_classes].
  Tensor logits(const Tensor& z) const;
  // Column of the highest score per row, ties to the lowest index.
  std::vector<std::size_t> predict_columns(const Tensor& z) const;

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::uint32_t layers_;
  std::uint32_t dim_;
  std::vector<std::uint32_t> classes_;
  LayerWeighting weighting_;
  std::vector<Parameter> params_;  // featurizer, then (w, b) per MLP layer
};

struct ProbeTraining {
  ProbeModel model;
  // Validation accuracy after each completed epoch.
  std::vector<double> val_accuracy;
  // Accuracy of the returned model on the validation set; epoch 0 means
  // the initial model was kept.
  double best_val_accuracy = 0.0;
  std::size_t best_epoch = 0;
};

// Adam on mean cross-entropy. Stops when validation accuracy has not
// improved for `patience` epochs and returns the best-validation model.
// Throws DegenerateTaskError with fewer than two classes in `train`.
ProbeTraining train_probe(const data::Corpus& train, const data::Corpus& val,
                          const data::LabelMap& labels, const ProbeConfig& config);
// Holds out 10% of the utterances of `corpus` for early stopping.
ProbeTraining train_probe(const data::Corpus& corpus, const data::LabelMap& labels,
                          const ProbeConfig& config);

// Predicted label value per record.
std::vector<std::uint32_t> predict(const ProbeModel& model, const data::Corpus& corpus);

// Throws ContractError on an empty corpus and DataError on unlabeled records.
Metrics evaluate(const ProbeModel& model, const data::Corpus& corpus,
                 const data::LabelMap& labels);

// Train/val/test probing of one labeled task on a split of `corpus`.
struct TaskRun {
  Metrics metrics;
  std::size_t best_epoch = 0;
  std::vector<double> val_accuracy;
};
TaskRun run_task(const data::Corpus& corpus, const data::LabelMap& labels,
                 const ProbeConfig& config, data::SplitUnit unit,
                 std::uint64_t split_seed,
                 std::array<double, 3> ratios = {0.8, 0.1, 0.1});

// Speaker identification attack with a speaker-stratified 80/10/10 split;
// lower test accuracy means better privacy.
Metrics sid_attack(const data::Corpus& corpus, const ProbeConfig& config,
                   std::uint64_t split_seed);

}  // namespace embanon::probes
