#include "embanon/model/privacy_transformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>

#include "embanon/data/binary_io.hpp"
#include "embanon/errors.hpp"
#include "embanon/numerics/ops.hpp"

namespace embanon::model {

using namespace numerics;

void PrivacyTransformerConfig::validate() const {
  if (layers == 0 || dim == 0 || d_spk == 0 || d_layer == 0 || n_layers == 0 ||
      n_heads == 0 || d_ff == 0 || n_speakers == 0) {
    throw ConfigError("privacy transformer dimensions must be positive");
  }
  if (model_dim() % n_heads != 0) {
    throw ConfigError("model width d + d_spk + d_layer = " +
                      std::to_string(model_dim()) +
                      " is not divisible by n_heads = " + std::to_string(n_heads));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
}

namespace {

std::vector<std::uint32_t> default_pool(std::uint32_t n) {
  std::vector<std::uint32_t> pool(n);
  for (std::uint32_t i = 0; i < n; ++i) pool[i] = i;
  return pool;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_bias(matmul(x, w), b);
}

}  // namespace

PrivacyTransformer::PrivacyTransformer(const PrivacyTransformerConfig& config)
    : PrivacyTransformer(config, default_pool(config.n_speakers)) {}

PrivacyTransformer::PrivacyTransformer(const PrivacyTransformerConfig& config,
                                       std::vector<std::uint32_t> speaker_pool)
    : config_(config), pool_(std::move(speaker_pool)) {
  config_.validate();
  if (pool_.size() != config_.n_speakers) {
    throw ConfigError("speaker pool has " + std::to_string(pool_.size()) +
                      " ids but n_speakers = " + std::to_string(config_.n_speakers));
  }
  if (std::set<std::uint32_t>(pool_.begin(), pool_.end()).size() != pool_.size()) {
    throw ConfigError("speaker pool contains duplicate ids");
  }

  const std::size_t md = config_.model_dim();
  const std::size_t ff = config_.d_ff;
  spk_table_ = add_param("spk_table", {config_.n_speakers, config_.d_spk});
  layer_table_ = add_param("layer_table", {config_.layers, config_.d_layer});
  for (std::uint32_t i = 0; i < config_.n_layers; ++i) {
    const std::string p = "enc." + std::to_string(i) + ".";
    EncoderLayer e;
    e.wq = add_param(p + "attn.wq", {md, md});
    e.bq = add_param(p + "attn.bq", {md});
    e.wk = add_param(p + "attn.wk", {md, md});
    e.bk = add_param(p + "attn.bk", {md});
    e.wv = add_param(p + "attn.wv", {md, md});
    e.bv = add_param(p + "attn.bv", {md});
    e.wo = add_param(p + "attn.wo", {md, md});
    e.bo = add_param(p + "attn.bo", {md});
    e.ln1_gain = add_param(p + "ln1.gain", {md});
    e.ln1_bias = add_param(p + "ln1.bias", {md});
    e.w1 = add_param(p + "ffn.w1", {md, ff});
    e.b1 = add_param(p + "ffn.b1", {ff});
    e.w2 = add_param(p + "ffn.w2", {ff, md});
    e.b2 = add_param(p + "ffn.b2", {md});
    e.ln2_gain = add_param(p + "ln2.gain", {md});
    e.ln2_bias = add_param(p + "ln2.bias", {md});
    encoder_.push_back(std::move(e));
  }
  out_w_ = add_param("out_proj.w", {md, config_.dim});
  out_b_ = add_param("out_proj.b", {config_.dim});
  initialize();
}

Tensor PrivacyTransformer::add_param(const std::string& name, Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  params_.push_back({name, t});
  return t;
}

void PrivacyTransformer::initialize() {
  Rng rng(derive_seed(config_.seed, 0x5054));
  auto xavier = [&](Tensor& w) {
    const double fan_in = static_cast<double>(w.dim(0));
    const double fan_out = static_cast<double>(w.dim(1));
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : w.mutable_values()) v = rng.uniform(-limit, limit);
  };
  auto normal = [&](Tensor& w, double sd) {
    for (double& v : w.mutable_values()) v = rng.normal(0.0, sd);
  };
  auto ones = [](Tensor& w) {
    for (double& v : w.mutable_values()) v = 1.0;
  };
  // Biases and layer-norm offsets stay at their zero construction value.
  normal(spk_table_, 0.02);
  normal(layer_table_, 0.02);
  for (EncoderLayer& e : encoder_) {
    xavier(e.wq);
    xavier(e.wk);
    xavier(e.wv);
    xavier(e.wo);
    ones(e.ln1_gain);
    xavier(e.w1);
    xavier(e.w2);
    ones(e.ln2_gain);
  }
  xavier(out_w_);
}

std::size_t PrivacyTransformer::pool_index(std::uint32_t speaker_id) const {
  const auto it = std::find(pool_.begin(), pool_.end(), speaker_id);
  if (it == pool_.end()) {
    throw IndexError("speaker " + std::to_string(speaker_id) +
                     " is not in the model's speaker pool");
  }
  return static_cast<std::size_t>(it - pool_.begin());
}

std::size_t PrivacyTransformer::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.tensor.numel();
  return n;
}

Tensor PrivacyTransformer::forward(const Tensor& z,
                                   std::span<const std::size_t> targets,
                                   Mode mode, Rng* rng,
                                   std::span<const std::size_t> layer_ids) const {
  const std::size_t L = config_.layers;
  const std::size_t d = config_.dim;
  if (z.ndim() != 3 || z.dim(1) != L || z.dim(2) != d) {
    throw ContractError("privacy transformer expects input [B x " +
                        std::to_string(L) + " x " + std::to_string(d) +
                        "], got " + shape_string(z.shape()));
  }
  const std::size_t batch = z.dim(0);
  const std::size_t tokens = batch * L;
  if (targets.size() != tokens) {
    throw ContractError("expected " + std::to_string(tokens) +
                        " target ids, got " + std::to_string(targets.size()));
  }
  for (std::size_t t : targets) {
    if (t >= config_.n_speakers) {
      throw IndexError("target speaker row " + std::to_string(t) +
                       " outside table of " + std::to_string(config_.n_speakers));
    }
  }
  std::vector<std::size_t> default_ids;
  if (layer_ids.empty()) {
    default_ids.resize(tokens);
    for (std::size_t i = 0; i < tokens; ++i) default_ids[i] = i % L;
    layer_ids = default_ids;
  } else if (layer_ids.size() != tokens) {
    throw ContractError("expected " + std::to_string(tokens) + " layer ids, got " +
                        std::to_string(layer_ids.size()));
  }
  const bool train = mode == Mode::kTrain;
  if (train && config_.dropout > 0.0 && rng == nullptr) {
    throw ContractError("train-mode forward needs a dropout rng");
  }
  Rng unused(0);
  Rng& drop_rng = rng ? *rng : unused;
  const double p = config_.dropout;

  Tensor h = concat_last({reshape(z, {tokens, d}),
                          embedding_lookup(spk_table_, targets),
                          embedding_lookup(layer_table_, layer_ids)});
  for (const EncoderLayer& e : encoder_) {
    Tensor attn = multi_head_attention(linear(h, e.wq, e.bq), linear(h, e.wk, e.bk),
                                       linear(h, e.wv, e.bv), batch, L,
                                       config_.n_heads);
    attn = dropout(linear(attn, e.wo, e.bo), p, train, drop_rng);
    h = layer_norm(add(h, attn), e.ln1_gain, e.ln1_bias);
    Tensor ff = linear(relu(linear(h, e.w1, e.b1)), e.w2, e.b2);
    ff = dropout(ff, p, train, drop_rng);
    h = layer_norm(add(h, ff), e.ln2_gain, e.ln2_bias);
  }
  return reshape(linear(h, out_w_, out_b_), {batch, L, d});
}

// ---------------------------------------------------------------- training

namespace {

Tensor stack_matrices(std::span<const data::ParallelPair> pairs, bool source,
                      std::size_t L, std::size_t d) {
  std::vector<double> values;
  values.reserve(pairs.size() * L * d);
  for (const auto& p : pairs) {
    const auto& m = source ? p.src.matrix : p.tgt.matrix;
    if (m.size() != L * d) {
      throw ContractError("pair matrix has " + std::to_string(m.size()) +
                          " values, model expects " + std::to_string(L * d));
    }
    values.insert(values.end(), m.begin(), m.end());
  }
  return Tensor({pairs.size(), L, d}, std::move(values));
}

}  // namespace

Tensor pair_loss(const PrivacyTransformer& model,
                 std::span<const data::ParallelPair> pairs, Mode mode,
                 Rng* rng, LossReduction reduction) {
  if (pairs.empty()) throw ContractError("pair_loss needs at least one pair");
  const std::size_t L = model.config().layers, d = model.config().dim;
  const Tensor src = stack_matrices(pairs, true, L, d);
  const Tensor tgt = stack_matrices(pairs, false, L, d);
  std::vector<std::size_t> targets;
  targets.reserve(pairs.size() * L);
  for (const auto& p : pairs) {
    const std::size_t row = model.pool_index(p.tgt.speaker_id);
    targets.insert(targets.end(), L, row);
  }
  Tensor loss = mse_loss(model.forward(src, targets, mode, rng), tgt);
  return reduction == LossReduction::kMean
             ? loss
             : scale(loss, static_cast<double>(L * d));
}

double train_step(PrivacyTransformer& model,
                  std::span<const data::ParallelPair> pairs, double lr,
                  Rng& dropout_rng, LossReduction reduction) {
  Tensor loss = pair_loss(model, pairs, Mode::kTrain, &dropout_rng, reduction);
  const double value = loss.item();
  loss.backward();
  sgd_step(model.parameters(), lr);
  zero_grad(model.parameters());
  return value;
}

namespace {

double eval_loss(const PrivacyTransformer& model,
                 const std::vector<data::ParallelPair>& pairs, std::size_t batch,
                 LossReduction reduction) {
  NoGradGuard no_grad;
  double total = 0.0;
  for (std::size_t i = 0; i < pairs.size(); i += batch) {
    const std::size_t n = std::min(batch, pairs.size() - i);
    const std::span<const data::ParallelPair> chunk(pairs.data() + i, n);
    total += pair_loss(model, chunk, Mode::kEval, nullptr, reduction).item() * static_cast<double>(n);
  }
  return total / static_cast<double>(pairs.size());
}

std::vector<std::vector<double>> snapshot(const PrivacyTransformer& model) {
  std::vector<std::vector<double>> out;
  for (const Parameter& p : model.parameters()) {
    out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  }
  return out;
}

void restore(PrivacyTransformer& model,
             const std::vector<std::vector<double>>& values) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(values[i].begin(), values[i].end(),
              params[i].tensor.mutable_values().begin());
  }
}

}  // namespace

TrainReport train(PrivacyTransformer& model, const data::Corpus& corpus,
                  const TrainOptions& options) {
  if (options.batch == 0) throw ConfigError("batch size must be positive");
  if (!(options.val_fraction >= 0.0 && options.val_fraction < 1.0)) {
    throw ConfigError("val_fraction must lie in [0, 1)");
  }
  if (corpus.layers != model.config().layers || corpus.dim != model.config().dim) {
    throw ContractError("corpus is " + std::to_string(corpus.layers) + " x " +
                        std::to_string(corpus.dim) + " but model expects " +
                        std::to_string(model.config().layers) + " x " +
                        std::to_string(model.config().dim));
  }

  // Hold out whole contents so validation pairs are unseen sentences.
  std::set<std::uint32_t> content_set;
  for (const auto& r : corpus.records) content_set.insert(r.content_id);
  std::vector<std::uint32_t> contents(content_set.begin(), content_set.end());
  Rng split_rng(derive_seed(options.seed, 3));
  split_rng.shuffle(contents);
  std::size_t n_val = 0;
  if (options.val_fraction > 0.0 && contents.size() >= 2) {
    n_val = static_cast<std::size_t>(
        std::llround(options.val_fraction * static_cast<double>(contents.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, contents.size() - 1);
  }
  const std::set<std::uint32_t> val_contents(contents.begin(),
                                             contents.begin() + n_val);
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    (val_contents.contains(corpus.records[i].content_id) ? val_idx : train_idx)
        .push_back(i);
  }

  const data::PairSampler train_sampler(corpus, train_idx);
  const data::PairSampler val_sampler(corpus, val_idx);
  Rng pair_rng(derive_seed(options.seed, 1));
  Rng dropout_rng(derive_seed(options.seed, 2));
  Rng fixed_rng(derive_seed(options.seed, 4));

  const std::size_t per_epoch =
      options.pairs_per_epoch ? options.pairs_per_epoch : train_idx.size();
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, per_epoch / options.batch);
  const std::vector<data::ParallelPair> train_probe =
      train_sampler.sample(std::min<std::size_t>(256, std::max<std::size_t>(per_epoch, 1)),
                           fixed_rng);
  std::vector<data::ParallelPair> val_pairs;
  if (val_sampler.eligible_contents() > 0) {
    val_pairs = val_sampler.sample(options.val_pairs ? options.val_pairs : val_idx.size(),
                                   fixed_rng);
  }
  const bool has_val = !val_pairs.empty();

  TrainReport report;
  report.initial_train_loss = eval_loss(model, train_probe, 64, options.reduction);
  report.initial_val_loss = has_val ? eval_loss(model, val_pairs, 64, options.reduction) : 0.0;
  report.best_val_loss = report.initial_val_loss;
  std::vector<std::vector<double>> best;
  if (has_val) best = snapshot(model);

  for (std::uint32_t epoch = 1; epoch <= options.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const auto batch = train_sampler.sample(options.batch, pair_rng);
      total += train_step(model, batch, options.lr, dropout_rng, options.reduction);
      ++report.steps;
    }
    report.train_loss.push_back(total / static_cast<double>(steps_per_epoch));
    if (has_val) {
      const double v = eval_loss(model, val_pairs, 64, options.reduction);
      report.val_loss.push_back(v);
      if (v < report.best_val_loss) {
        report.best_val_loss = v;
        report.best_epoch = epoch;
        best = snapshot(model);
      }
    } else {
      report.best_epoch = epoch;
    }
  }
  if (has_val && report.best_epoch != options.epochs) restore(model, best);
  return report;
}

// --------------------------------------------------------------- inference

std::vector<std::size_t> draw_targets(std::size_t n_utterances, std::size_t layers,
                                      std::size_t pool_size, Rng& rng) {
  if (pool_size == 0) throw ContractError("cannot draw targets from an empty pool");
  std::vector<std::size_t> out(n_utterances * layers);
  for (std::size_t& t : out) t = rng.uniform_index(pool_size);
  return out;
}

Tensor anonymize(const PrivacyTransformer& model, const Tensor& z, Rng& rng) {
  const auto& cfg = model.config();
  if (z.ndim() != 3 || z.dim(1) != cfg.layers || z.dim(2) != cfg.dim) {
    throw ContractError("cannot anonymize " + shape_string(z.shape()) +
                        " with a model for " + std::to_string(cfg.layers) + " x " +
                        std::to_string(cfg.dim) + " embeddings");
  }
  const auto targets = draw_targets(z.dim(0), cfg.layers, cfg.n_speakers, rng);
  NoGradGuard no_grad;
  return model.forward(z, targets, Mode::kEval);
}

data::Corpus anonymize(const PrivacyTransformer& model, const data::Corpus& corpus,
                       std::uint64_t seed, std::size_t batch) {
  const auto& cfg = model.config();
  if (corpus.layers != cfg.layers || corpus.dim != cfg.dim) {
    throw ContractError("corpus is " + std::to_string(corpus.layers) + " x " +
                        std::to_string(corpus.dim) + " but the model expects " +
                        std::to_string(cfg.layers) + " x " + std::to_string(cfg.dim));
  }
  if (batch == 0) throw ContractError("anonymize batch must be positive");
  Rng rng(seed);
  data::Corpus out = corpus;
  const std::size_t m = corpus.matrix_size();
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < corpus.records.size(); i += batch) {
    const std::size_t n = std::min(batch, corpus.records.size() - i);
    idx.resize(n);
    for (std::size_t j = 0; j < n; ++j) idx[j] = i + j;
    const Tensor result = anonymize(model, data::to_tensor(corpus, idx), rng);
    const auto values = result.values();
    for (std::size_t j = 0; j < n; ++j) {
      auto& dst = out.records[i + j].matrix;
      for (std::size_t k = 0; k < m; ++k) dst[k] = static_cast<float>(values[j * m + k]);
    }
  }
  return out;
}

// ------------------------------------------------------------- checkpoints

std::vector<std::uint8_t> encode_checkpoint(const PrivacyTransformer& model) {
  const auto& c = model.config();
  data::ByteWriter w;
  w.bytes("PTCK");
  w.u16(kCheckpointVersion);
  w.u16(0);
  for (std::uint32_t v : {c.layers, c.dim, c.d_spk, c.d_layer, c.n_layers, c.n_heads,
                          c.d_ff, c.n_speakers}) {
    w.u32(v);
  }
  w.f64(c.dropout);
  w.u64(c.seed);
  for (std::uint32_t s : model.speaker_pool()) w.u32(s);
  w.u32(static_cast<std::uint32_t>(model.parameters().size()));
  for (const Parameter& p : model.parameters()) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.ndim()));
    for (std::size_t extent : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(extent));
    for (double v : p.tensor.values()) w.f32(static_cast<float>(v));
  }
  return w.take();
}

PrivacyTransformer decode_checkpoint(std::span<const std::uint8_t> bytes) {
  data::ByteReader r(bytes);
  if (r.bytes(4, "magic") != "PTCK") {
    throw FormatError("not a privacy transformer checkpoint: bad magic", 0);
  }
  const std::uint64_t version_at = r.offset();
  const std::uint16_t version = r.u16("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version),
                      version_at);
  }
  if (r.u16("reserved") != 0) throw FormatError("reserved field must be zero", 6);

  const std::uint64_t config_at = r.offset();
  PrivacyTransformerConfig c;
  c.layers = r.u32("L");
  c.dim = r.u32("d");
  c.d_spk = r.u32("d_spk");
  c.d_layer = r.u32("d_layer");
  c.n_layers = r.u32("n_layers");
  c.n_heads = r.u32("n_heads");
  c.d_ff = r.u32("d_ff");
  c.n_speakers = r.u32("n_speakers");
  c.dropout = r.f64("dropout");
  c.seed = r.u64("seed");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid checkpoint config: ") + e.what(), config_at);
  }
  // Reject sizes the payload cannot possibly hold before allocating.
  r.need(4 * static_cast<std::uint64_t>(c.n_speakers), "speaker pool");
  std::vector<std::uint32_t> pool(c.n_speakers);
  for (auto& s : pool) s = r.u32("speaker id");
  const std::uint64_t pool_end = r.offset();
  if (c.model_dim() > (1u << 20) || c.d_ff > (1u << 20) || c.n_layers > 1024 ||
      c.layers > (1u << 20)) {
    throw FormatError("implausible checkpoint dimensions", config_at);
  }
  // Encoder weights alone bound the payload from below.
  r.need(4 * static_cast<std::uint64_t>(c.model_dim()) *
             (4 * c.model_dim() + 2 * static_cast<std::uint64_t>(c.d_ff)) * c.n_layers,
         "parameter payload");

  PrivacyTransformer model = [&] {
    try {
      return PrivacyTransformer(c, pool);
    } catch (const ConfigError& e) {
      throw FormatError(std::string("invalid checkpoint pool: ") + e.what(), pool_end);
    }
  }();

  auto params = model.parameters();
  const std::uint64_t count_at = r.offset();
  const std::uint32_t count = r.u32("parameter count");
  if (count != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) +
                          " parameters, config implies " + std::to_string(params.size()),
                      count_at);
  }
  for (Parameter& p : params) {
    const std::uint64_t at = r.offset();
    const std::string name = r.bytes(r.u16("name length"), "parameter name");
    if (name != p.name) {
      throw FormatError("expected parameter '" + p.name + "', found '" + name + "'", at);
    }
    const std::uint64_t shape_at = r.offset();
    const std::uint32_t ndim = r.u32("rank");
    Shape shape;
    for (std::uint32_t i = 0; i < std::min<std::uint32_t>(ndim, 8); ++i)
      shape.push_back(r.u32("extent"));
    if (ndim > 8 || shape != p.tensor.shape()) {
      throw FormatError("parameter '" + name + "' has shape " + shape_string(shape) +
                            ", expected " + shape_string(p.tensor.shape()),
                        shape_at);
    }
    r.need(4 * p.tensor.numel(), "values of " + name);
    for (double& v : p.tensor.mutable_values()) {
      const float f = r.f32("value");
      if (!std::isfinite(f)) {
        throw FormatError("non-finite value in parameter '" + name + "'", r.offset() - 4);
      }
      v = f;
    }
  }
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after checkpoint", r.offset());
  }
  return model;
}

void save(const PrivacyTransformer& model, const std::filesystem::path& path) {
  data::write_file_bytes(path, encode_checkpoint(model));
}

PrivacyTransformer load(const std::filesystem::path& path) {
  return decode_checkpoint(data::read_file_bytes(path));
}

}  // namespace embanon::model
