#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "embanon/data/corpus.hpp"
#include "embanon/data/sampling.hpp"
#include "embanon/numerics/optim.hpp"
#include "embanon/numerics/rng.hpp"
#include "embanon/numerics/tensor.hpp"

namespace embanon::model {

using numerics::Parameter;
using numerics::Tensor;

struct PrivacyTransformerConfig {
  std::uint32_t layers = 12;  // tokens per utterance (L)
  std::uint32_t dim = 768;    // input/output width (d)
  std::uint32_t d_spk = 256;
  std::uint32_t d_layer = 128;
  std::uint32_t n_layers = 5;  // encoder stack depth
  std::uint32_t n_heads = 8;
  std::uint32_t d_ff = 4608;
  std::uint32_t n_speakers = 1;
  double dropout = 0.1;
  std::uint64_t seed = 0;

  std::size_t model_dim() const {
    return static_cast<std::size_t>(dim) + d_spk + d_layer;
  }
  std::size_t head_dim() const { return model_dim() / n_heads; }
  // Throws ConfigError.
  void validate() const;
  bool operator==(const PrivacyTransformerConfig&) const = default;
};

enum class Mode { kTrain, kEval };

// Handles into the owning model's parameter list.
struct EncoderLayer {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln1_gain, ln1_bias;
  Tensor w1, b1, w2, b2;
  Tensor ln2_gain, ln2_bias;
};

// Speaker-conditioned encoder: each of the L layer rows of an utterance is
// one token, extended with a target-speaker embedding and a layer
// embedding, passed through a post-norm self-attention stack without
// positional encoding and projected back to width d.
class PrivacyTransformer {
 public:
  // Pool defaults to speaker ids 0..n_speakers-1.
  explicit PrivacyTransformer(const PrivacyTransformerConfig& config);
  // Table row i belongs to speaker_pool[i]; n_speakers must match.
  PrivacyTransformer(const PrivacyTransformerConfig& config,
                     std::vector<std::uint32_t> speaker_pool);

  PrivacyTransformer(const PrivacyTransformer&) = delete;
  PrivacyTransformer& operator=(const PrivacyTransformer&) = delete;
  PrivacyTransformer(PrivacyTransformer&&) = default;
  PrivacyTransformer& operator=(PrivacyTransformer&&) = default;

  const PrivacyTransformerConfig& config() const { return config_; }
  const std::vector<std::uint32_t>& speaker_pool() const { return pool_; }
  // Table row of a speaker id; IndexError if it is not in the pool.
  std::size_t pool_index(std::uint32_t speaker_id) const;

  std::span<Parameter> parameters() { return params_; }
  std::span<const Parameter> parameters() const { return params_; }
  std::size_t parameter_count() const;

  const Tensor& speaker_table() const { return spk_table_; }
  const Tensor& layer_table() const { return layer_table_; }
  const std::vector<EncoderLayer>& encoder() const { return encoder_; }

  // z[B x L x d] -> [B x L x d]. targets holds B*L speaker table rows, one
  // per token. layer_ids (optional, B*L entries) picks the layer-table row
  // of every token and defaults to the token position. Train mode applies
  // dropout drawn from *rng, which must then be non-null.
  Tensor forward(const Tensor& z, std::span<const std::size_t> targets,
                 Mode mode, numerics::Rng* rng = nullptr,
                 std::span<const std::size_t> layer_ids = {}) const;

 private:
  Tensor add_param(const std::string& name, numerics::Shape shape);
  void initialize();

  PrivacyTransformerConfig config_;
  std::vector<std::uint32_t> pool_;
  std::vector<Parameter> params_;
  Tensor spk_table_, layer_table_;
  std::vector<EncoderLayer> encoder_;
  Tensor out_w_, out_b_;
};

enum class LossReduction {
  // Mean over batch x L x d.
  kMean,
  // Squared distance summed over the L x d values of each utterance, then
  // averaged over the batch: L * d times kMean, same direction.
  kUtterance,
};

// Squared error of the model's prediction of every tgt from its src,
// conditioned on tgt's speaker at all L tokens.
Tensor pair_loss(const PrivacyTransformer& model,
                 std::span<const data::ParallelPair> pairs, Mode mode,
                 numerics::Rng* rng = nullptr,
                 LossReduction reduction = LossReduction::kMean);

// One SGD step on `pairs`; returns the loss before the update.
double train_step(PrivacyTransformer& model,
                  std::span<const data::ParallelPair> pairs, double lr,
                  numerics::Rng& dropout_rng,
                  LossReduction reduction = LossReduction::kMean);

struct TrainOptions {
  std::uint32_t epochs = 50;
  double lr = 1e-3;
  std::size_t batch = 32;
  // Fraction of contents held out to form the validation pairs.
  double val_fraction = 0.1;
  // Training pairs drawn per epoch; 0 means one per training record.
  std::size_t pairs_per_epoch = 0;
  // Size of the fixed validation pair set; 0 means one per held-out record.
  std::size_t val_pairs = 0;
  LossReduction reduction = LossReduction::kMean;
  std::uint64_t seed = 0;
};

struct TrainReport {
  // All losses use the training reduction.
  // Eval-mode loss on the fixed training probe set and validation set
  // before the first step.
  double initial_train_loss = 0.0;
  double initial_val_loss = 0.0;
  // Per epoch: mean pre-step minibatch loss, eval-mode validation loss.
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  // 0 means the initial parameters were kept.
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::size_t steps = 0;

  bool operator==(const TrainReport&) const = default;
};

// Trains on parallel pairs of `corpus`; the model ends at the parameters
// with the lowest validation loss (the last epoch when nothing is held out).
TrainReport train(PrivacyTransformer& model, const data::Corpus& corpus,
                  const TrainOptions& options);

// L i.i.d. uniform pool rows for each of n utterances.
std::vector<std::size_t> draw_targets(std::size_t n_utterances,
                                      std::size_t layers,
                                      std::size_t pool_size, numerics::Rng& rng);

// Eval-mode forward of z[B x L x d] with freshly drawn per-token targets.
Tensor anonymize(const PrivacyTransformer& model, const Tensor& z,
                 numerics::Rng& rng);
// Replaces every record's matrix; metadata is kept. Records are processed
// in order in chunks of `batch`, so results do not depend on batch size.
data::Corpus anonymize(const PrivacyTransformer& model,
                       const data::Corpus& corpus, std::uint64_t seed,
                       std::size_t batch = 64);

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const PrivacyTransformer& model);
PrivacyTransformer decode_checkpoint(std::span<const std::uint8_t> bytes);
void save(const PrivacyTransformer& model, const std::filesystem::path& path);
PrivacyTransformer load(const std::filesystem::path& path);

}  // namespace embanon::model
