#include "embanon/probes/probe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "embanon/errors.hpp"
#include "embanon/numerics/ops.hpp"

namespace embanon::probes {

using namespace numerics;

void ProbeConfig::validate() const {
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("probe hidden sizes must be positive");
  }
  if (patience < 1) throw ConfigError("probe patience must be at least 1");
  if (batch == 0) throw ConfigError("probe batch size must be positive");
  if (!(lr > 0.0)) throw ConfigError("probe learning rate must be positive");
}

ProbeModel::ProbeModel(std::uint32_t layers, std::uint32_t dim,
                       std::vector<std::uint32_t> classes, const ProbeConfig& config)
    : layers_(layers), dim_(dim), classes_(std::move(classes)),
      weighting_(config.weighting) {
  config.validate();
  if (layers == 0 || dim == 0) throw ConfigError("probe input dims must be positive");
  if (classes_.size() < 2) {
    throw DegenerateTaskError("a probe needs at least two classes");
  }
  // Zero logits start as the plain layer mean under softmax; raw weights
  // start at that same point.
  const double w0 = weighting_ == LayerWeighting::kSoftmax ? 0.0 : 1.0 / layers;
  params_.push_back({"featurizer", Tensor::full({layers}, w0, true)});

  Rng rng(derive_seed(config.seed, 0x5052));
  std::vector<std::size_t> sizes{dim};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(classes_.size());
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes[i] + sizes[i + 1]));
    std::vector<double> w(sizes[i] * sizes[i + 1]);
    for (double& v : w) v = rng.uniform(-limit, limit);
    params_.push_back({"mlp." + std::to_string(i) + ".w",
                       Tensor({sizes[i], sizes[i + 1]}, std::move(w), true)});
    params_.push_back({"mlp." + std::to_string(i) + ".b",
                       Tensor::zeros({sizes[i + 1]}, true)});
  }
}

Tensor ProbeModel::layer_weights() const {
  return weighting_ == LayerWeighting::kSoftmax ? softmax_last(params_[0].tensor)
                                                : params_[0].tensor;
}

Tensor ProbeModel::featurize(const Tensor& z) const {
  if (z.ndim() != 3 || z.dim(1) != layers_ || z.dim(2) != dim_) {
    throw ContractError("probe expects [B x " + std::to_string(layers_) + " x " +
                        std::to_string(dim_) + "], got " + shape_string(z.shape()));
  }
  return weighted_layer_sum(z, layer_weights());
}

Tensor ProbeModel::logits(const Tensor& z) const {
  Tensor h = featurize(z);
  const std::size_t n_linear = (params_.size() - 1) / 2;
  for (std::size_t i = 0; i < n_linear; ++i) {
    h = add_bias(matmul(h, params_[1 + 2 * i].tensor), params_[2 + 2 * i].tensor);
    if (i + 1 < n_linear) h = relu(h);
  }
  return h;
}

std::vector<std::size_t> ProbeModel::predict_columns(const Tensor& z) const {
  NoGradGuard no_grad;
  const Tensor scores = logits(z);
  const std::size_t n = scores.dim(0), k = scores.dim(1);
  const auto v = scores.values();
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (v[i * k + c] > v[i * k + best]) best = c;
    }
    out[i] = best;
  }
  return out;
}

std::vector<std::vector<double>> ProbeModel::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const Parameter& p : params_) {
    out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  }
  return out;
}

void ProbeModel::restore(const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    std::copy(values[i].begin(), values[i].end(),
              params_[i].tensor.mutable_values().begin());
  }
}

namespace {

// Labeled view of a corpus: flat float64 matrices plus class columns.
struct Encoded {
  std::size_t n = 0;
  std::size_t m = 0;  // L * d
  std::vector<double> values;
  std::vector<std::size_t> columns;
};

std::uint32_t label_of(const data::LabelMap& labels, const data::UtteranceEmbedding& r) {
  const auto it = labels.find(r.utterance_id);
  if (it == labels.end()) {
    throw DataError("utterance " + std::to_string(r.utterance_id) + " has no label");
  }
  return it->second;
}

Encoded encode(const data::Corpus& corpus, const data::LabelMap& labels,
               const std::map<std::uint32_t, std::size_t>& column_of) {
  Encoded e;
  e.n = corpus.records.size();
  e.m = corpus.matrix_size();
  e.values.reserve(e.n * e.m);
  for (const auto& r : corpus.records) {
    const auto it = column_of.find(label_of(labels, r));
    if (it == column_of.end()) {
      throw DataError("utterance " + std::to_string(r.utterance_id) +
                      " carries a class absent from training");
    }
    e.columns.push_back(it->second);
    e.values.insert(e.values.end(), r.matrix.begin(), r.matrix.end());
  }
  return e;
}

Tensor gather(const Encoded& e, std::span<const std::size_t> rows, std::uint32_t L,
              std::uint32_t d) {
  std::vector<double> v(rows.size() * e.m);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(e.values.begin() + rows[i] * e.m, e.m, v.begin() + i * e.m);
  }
  return Tensor({rows.size(), L, d}, std::move(v));
}

std::vector<std::size_t> predict_all(const ProbeModel& model, const Encoded& e) {
  std::vector<std::size_t> out;
  out.reserve(e.n);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < e.n; i += 256) {
    const std::size_t n = std::min<std::size_t>(256, e.n - i);
    rows.resize(n);
    for (std::size_t j = 0; j < n; ++j) rows[j] = i + j;
    const auto cols = model.predict_columns(gather(e, rows, model.layers(), model.dim()));
    out.insert(out.end(), cols.begin(), cols.end());
  }
  return out;
}

double accuracy(const ProbeModel& model, const Encoded& e) {
  const auto pred = predict_all(model, e);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < e.n; ++i) correct += pred[i] == e.columns[i];
  return static_cast<double>(correct) / static_cast<double>(e.n);
}

}  // namespace

ProbeTraining train_probe(const data::Corpus& train, const data::Corpus& val,
                          const data::LabelMap& labels, const ProbeConfig& config) {
  config.validate();
  if (train.records.empty()) throw ContractError("probe training set is empty");
  if (val.records.size() && (val.layers != train.layers || val.dim != train.dim)) {
    throw ContractError("train and validation corpora differ in shape");
  }
  std::set<std::uint32_t> class_set;
  for (const auto& r : train.records) class_set.insert(label_of(labels, r));
  if (class_set.size() < 2) {
    throw DegenerateTaskError("training labels contain a single class; nothing to probe");
  }
  std::vector<std::uint32_t> classes(class_set.begin(), class_set.end());
  std::map<std::uint32_t, std::size_t> column_of;
  for (std::size_t c = 0; c < classes.size(); ++c) column_of[classes[c]] = c;

  ProbeTraining out{ProbeModel(train.layers, train.dim, classes, config), {}, 0.0, 0};
  ProbeModel& model = out.model;
  const Encoded tr = encode(train, labels, column_of);
  // Validation records of classes unseen in training can never be right;
  // they still count against accuracy.
  Encoded va;
  va.m = tr.m;
  for (const auto& r : val.records) {
    const auto it = column_of.find(label_of(labels, r));
    va.columns.push_back(it == column_of.end() ? classes.size() : it->second);
    va.values.insert(va.values.end(), r.matrix.begin(), r.matrix.end());
    ++va.n;
  }
  const bool has_val = va.n > 0;

  AdamState adam(model.parameters());
  const AdamOptions adam_options{.lr = config.lr};
  Rng order_rng(derive_seed(config.seed, 1));
  std::vector<std::size_t> order(tr.n);
  for (std::size_t i = 0; i < tr.n; ++i) order[i] = i;

  out.best_val_accuracy = has_val ? accuracy(model, va) : 0.0;
  auto best = model.snapshot();
  std::uint32_t since_best = 0;
  std::vector<std::size_t> rows, labels_batch;
  for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t i = 0; i < tr.n; i += config.batch) {
      const std::size_t n = std::min(config.batch, tr.n - i);
      rows.assign(order.begin() + i, order.begin() + i + n);
      labels_batch.resize(n);
      for (std::size_t j = 0; j < n; ++j) labels_batch[j] = tr.columns[rows[j]];
      Tensor loss = cross_entropy(model.logits(gather(tr, rows, train.layers, train.dim)),
                                  labels_batch);
      loss.backward();
      adam.step(model.parameters(), adam_options);
      numerics::zero_grad(model.parameters());
    }
    if (!has_val) {
      best = model.snapshot();
      out.best_epoch = epoch;
      continue;
    }
    const double acc = accuracy(model, va);
    out.val_accuracy.push_back(acc);
    if (acc > out.best_val_accuracy) {
      out.best_val_accuracy = acc;
      out.best_epoch = epoch;
      best = model.snapshot();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  model.restore(best);
  return out;
}

ProbeTraining train_probe(const data::Corpus& corpus, const data::LabelMap& labels,
                          const ProbeConfig& config) {
  const data::CorpusSplit s = data::split(corpus, {0.9, 0.1, 0.0},
                                          data::SplitUnit::kUtterance,
                                          derive_seed(config.seed, 2));
  return train_probe(s.train, s.val, labels, config);
}

std::vector<std::uint32_t> predict(const ProbeModel& model, const data::Corpus& corpus) {
  if (corpus.layers != model.layers() || corpus.dim != model.dim()) {
    throw ContractError("corpus shape does not match the probe");
  }
  Encoded e;
  e.n = corpus.records.size();
  e.m = corpus.matrix_size();
  for (const auto& r : corpus.records) e.values.insert(e.values.end(), r.matrix.begin(), r.matrix.end());
  std::vector<std::uint32_t> out;
  for (std::size_t c : predict_all(model, e)) out.push_back(model.classes()[c]);
  return out;
}

Metrics evaluate(const ProbeModel& model, const data::Corpus& corpus,
                 const data::LabelMap& labels) {
  if (corpus.records.empty()) throw ContractError("cannot evaluate on an empty corpus");
  std::vector<std::uint32_t> classes = model.classes();
  std::map<std::uint32_t, std::size_t> column_of;
  for (std::size_t c = 0; c < classes.size(); ++c) column_of[classes[c]] = c;
  // Labels the probe never saw get their own (never predicted) rows.
  std::set<std::uint32_t> extra;
  for (const auto& r : corpus.records) {
    const std::uint32_t y = label_of(labels, r);
    if (!column_of.contains(y)) extra.insert(y);
  }
  for (std::uint32_t y : extra) {
    column_of[y] = classes.size();
    classes.push_back(y);
  }
  const std::vector<std::uint32_t> pred = predict(model, corpus);
  std::vector<std::size_t> t, p;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    t.push_back(column_of.at(label_of(labels, corpus.records[i])));
    p.push_back(column_of.at(pred[i]));
  }
  Metrics m = compute_metrics(t, p, classes.size());
  return metrics_from_confusion(std::move(classes), std::move(m.confusion));
}

TaskRun run_task(const data::Corpus& corpus, const data::LabelMap& labels,
                 const ProbeConfig& config, data::SplitUnit unit,
                 std::uint64_t split_seed, std::array<double, 3> ratios) {
  const data::CorpusSplit s = data::split(corpus, ratios, unit, split_seed);
  ProbeTraining trained = train_probe(s.train, s.val, labels, config);
  return {evaluate(trained.model, s.test, labels), trained.best_epoch,
          std::move(trained.val_accuracy)};
}

Metrics sid_attack(const data::Corpus& corpus, const ProbeConfig& config,
                   std::uint64_t split_seed) {
  return run_task(corpus, data::speaker_labels(corpus), config,
                  data::SplitUnit::kSpeakerStratified, split_seed)
      .metrics;
}

}  // namespace embanon::probes
