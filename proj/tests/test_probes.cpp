#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "embanon/baselines/laplace.hpp"
#include "embanon/data/manifest.hpp"
#include "embanon/data/synthetic.hpp"
#include "embanon/errors.hpp"
#include "embanon/numerics/grad_check.hpp"
#include "embanon/numerics/ops.hpp"
#include "embanon/probes/probe.hpp"
#include "test_util.hpp"

using namespace embanon;
using namespace embanon::probes;
using numerics::Rng;
using numerics::Tensor;

namespace {

// Two classes in d = 8: sign of a fixed direction, with a margin.
data::Corpus separable_corpus(std::size_t n, std::uint64_t seed) {
  data::Corpus c;
  c.layers = 2;
  c.dim = 8;
  c.speakers = {0, 1};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t y = static_cast<std::uint32_t>(i % 2);
    std::vector<float> m(16);
    for (float& v : m) v = static_cast<float>(rng.normal());
    const float shift = y ? 2.0f : -2.0f;
    m[0] += shift;
    m[8] += shift;
    c.records.push_back({i, y, 0, std::move(m)});
  }
  return c;
}

// Every record's matrix replaced by fresh standard normals.
data::Corpus noise_corpus(const data::Corpus& base, std::uint64_t seed) {
  data::Corpus c = base;
  Rng rng(seed);
  for (auto& r : c.records)
    for (float& v : r.matrix) v = static_cast<float>(rng.normal());
  return c;
}

bool same_parameters(const ProbeModel& a, const ProbeModel& b) {
  return a.snapshot() == b.snapshot();
}

}  // namespace

TEST(Metrics, HandComputedFixture) {
  const std::vector<std::size_t> truth{0, 0, 1, 1}, pred{0, 1, 1, 1};
  const Metrics m = compute_metrics(truth, pred, 2);
  EXPECT_EQ(m.accuracy, 0.75);
  EXPECT_NEAR(m.f1[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.f1[1], 0.8, 1e-12);
  EXPECT_NEAR(m.macro_f1, 0.7333333333, 1e-9);
  EXPECT_EQ(m.confusion, (std::vector<std::vector<std::uint64_t>>{{1, 1}, {0, 2}}));
}

TEST(Metrics, PerfectAndConstantPredictors) {
  const std::vector<std::size_t> truth{0, 1, 2, 3, 0, 1, 2, 3};
  const Metrics perfect = compute_metrics(truth, truth, 4);
  EXPECT_EQ(perfect.accuracy, 1.0);
  EXPECT_EQ(perfect.macro_f1, 1.0);
  const std::vector<std::size_t> constant(8, 2);
  EXPECT_EQ(compute_metrics(truth, constant, 4).accuracy, 0.25);
}

TEST(Metrics, AbsentClassScoresZero) {
  const std::vector<std::size_t> truth{0, 0}, pred{0, 0};
  const Metrics m = compute_metrics(truth, pred, 2);
  EXPECT_EQ(m.f1[1], 0.0);
  EXPECT_EQ(m.macro_f1, 0.5);
}

TEST(Metrics, RecomputedFromConfusionIsIdentical) {
  Rng rng(1);
  std::vector<std::size_t> truth(500), pred(500);
  for (auto& t : truth) t = rng.uniform_index(5);
  for (auto& p : pred) p = rng.uniform_index(5);
  const Metrics m = compute_metrics(truth, pred, 5);
  EXPECT_EQ(metrics_from_confusion(m.classes, m.confusion), m);
  for (std::size_t c = 0; c < 5; ++c) {
    const auto& row = m.confusion[c];
    EXPECT_EQ(std::accumulate(row.begin(), row.end(), std::uint64_t{0}),
              static_cast<std::uint64_t>(std::count(truth.begin(), truth.end(), c)));
  }
}

TEST(Metrics, EmptyInput) {
  EXPECT_THROW(compute_metrics({}, {}, 2), ContractError);
}

TEST(Featurizer, SaturatedLogitsSelectLayer) {
  ProbeModel m(3, 4, {0, 1}, {});
  auto logits = m.parameters()[0].tensor.mutable_values();
  logits[0] = -100;
  logits[1] = 100;
  logits[2] = -100;
  Rng rng(2);
  const Tensor z = embanon::testing::random_tensor({2, 3, 4}, rng, 1.0, false);
  const Tensor f = m.featurize(z);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(f.at(b * 4 + k), z.at(b * 12 + 4 + k), 1e-10);
}

TEST(Featurizer, EqualLogitsGiveLayerMean) {
  const ProbeModel m(3, 4, {0, 1}, {});
  Rng rng(3);
  const Tensor z = embanon::testing::random_tensor({1, 3, 4}, rng, 1.0, false);
  const Tensor f = m.featurize(z);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(f.at(k), (z.at(k) + z.at(4 + k) + z.at(8 + k)) / 3.0, 1e-14);
  }
  const Tensor weights = m.layer_weights();
  double total = 0;
  for (double w : weights.values()) total += w;
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(Featurizer, GradientMatchesFiniteDifferences) {
  for (auto weighting : {LayerWeighting::kSoftmax, LayerWeighting::kRaw}) {
    ProbeModel m(4, 3, {0, 1}, {.weighting = weighting});
    Rng rng(4);
    auto logits = m.parameters()[0].tensor;
    for (double& v : logits.mutable_values()) v = rng.normal();
    const Tensor z = embanon::testing::random_tensor({5, 4, 3}, rng, 1.0, false);
    const Tensor target = embanon::testing::random_tensor({5, 3}, rng, 1.0, false);
    auto f = [&] { return numerics::mse_loss(m.featurize(z), target); };
    EXPECT_LT(numerics::grad_check(f, {logits}), 1e-4);
  }
}

TEST(Featurizer, ShapeMismatch) {
  const ProbeModel m(3, 4, {0, 1}, {});
  EXPECT_THROW(m.featurize(Tensor::zeros({2, 2, 4})), ContractError);
}

TEST(TrainProbe, SeparableDataIsLearnedExactly) {
  const data::Corpus c = separable_corpus(200, 5);
  const auto labels = data::speaker_labels(c);
  const ProbeTraining t = train_probe(c, c, labels, {.seed = 6});
  EXPECT_EQ(evaluate(t.model, c, labels).accuracy, 1.0);
}

TEST(TrainProbe, ZeroEpochsReturnsInitialModel) {
  const data::Corpus c = separable_corpus(40, 7);
  const ProbeTraining t = train_probe(c, c, data::speaker_labels(c), {.epochs = 0, .seed = 8});
  EXPECT_TRUE(same_parameters(t.model, ProbeModel(2, 8, {0, 1}, {.seed = 8})));
  EXPECT_EQ(t.best_epoch, 0u);
}

TEST(TrainProbe, Deterministic) {
  const data::Corpus c = separable_corpus(100, 9);
  const auto labels = data::speaker_labels(c);
  const ProbeConfig cfg{.epochs = 5, .seed = 10};
  EXPECT_TRUE(same_parameters(train_probe(c, labels, cfg).model, train_probe(c, labels, cfg).model));
}

TEST(TrainProbe, SingleClassIsDegenerate) {
  data::Corpus c = separable_corpus(10, 11);
  data::LabelMap labels;
  for (const auto& r : c.records) labels[r.utterance_id] = 3;
  EXPECT_THROW(train_probe(c, c, labels, {}), DegenerateTaskError);
}

TEST(TrainProbe, MissingLabelIsDataError) {
  const data::Corpus c = separable_corpus(10, 12);
  auto labels = data::speaker_labels(c);
  labels.erase(labels.begin());
  EXPECT_THROW(train_probe(c, c, labels, {}), DataError);
}

TEST(TrainProbe, EarlyStoppingKeepsBestValidationModel) {
  const data::Corpus c = data::generate_synthetic({.n_speakers = 6, .n_contents = 30, .noise_sigma = 1.0});
  const auto labels = data::speaker_labels(c);
  const auto s = data::split(c, {0.6, 0.4, 0.0}, data::SplitUnit::kSpeakerStratified, 13);
  const ProbeTraining t = train_probe(s.train, s.val, labels, {.patience = 2, .seed = 14});
  double best_seen = 0.0;
  for (double a : t.val_accuracy) best_seen = std::max(best_seen, a);
  EXPECT_GE(t.best_val_accuracy, best_seen);
  EXPECT_EQ(evaluate(t.model, s.val, labels).accuracy, t.best_val_accuracy);
  // Training ends at the first run of `patience` non-improving epochs.
  EXPECT_LE(t.val_accuracy.size(), t.best_epoch + 2);
}

TEST(Evaluate, ConstantPredictorOnBalancedData) {
  ProbeModel m(4, 32, {0, 1, 2, 3}, {});
  auto& last_bias = m.parameters().back().tensor;
  last_bias.mutable_values()[2] = 1e6;
  const data::Corpus c = data::generate_synthetic({.n_speakers = 4, .n_contents = 12});
  data::LabelMap labels;
  for (const auto& r : c.records) labels[r.utterance_id] = r.content_id % 4;
  const Metrics m2 = evaluate(m, c, labels);
  EXPECT_EQ(m2.accuracy, 0.25);
  EXPECT_EQ(m2.classes, (std::vector<std::uint32_t>{0, 1, 2, 3}));
}

TEST(Evaluate, RelabelingIsEquivariant) {
  // Permuting output columns together with the class list changes nothing.
  const data::Corpus c = data::generate_synthetic({.n_speakers = 4, .n_contents = 10});
  const auto labels = data::speaker_labels(c);
  ProbeTraining t = train_probe(c, labels, {.epochs = 3, .seed = 15});
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<std::uint32_t> classes(4);
  for (std::size_t i = 0; i < 4; ++i) classes[i] = t.model.classes()[perm[i]];
  ProbeModel permuted(c.layers, c.dim, classes, {.seed = 15});
  auto src = t.model.snapshot();
  auto dst = src;
  const std::size_t w = src.size() - 2, b = src.size() - 1;
  const std::size_t rows = src[w].size() / 4;
  for (std::size_t i = 0; i < 4; ++i) {
    dst[b][i] = src[b][perm[i]];
    for (std::size_t r = 0; r < rows; ++r) dst[w][r * 4 + i] = src[w][r * 4 + perm[i]];
  }
  permuted.restore(dst);
  EXPECT_EQ(predict(permuted, c), predict(t.model, c));
}

TEST(Evaluate, EmptyCorpus) {
  const ProbeModel m(4, 32, {0, 1}, {});
  data::Corpus empty;
  empty.layers = 4;
  empty.dim = 32;
  EXPECT_THROW(evaluate(m, empty, {}), ContractError);
}

TEST(SidAttack, NoiseEmbeddingsScoreChance) {
  const data::Corpus base = data::generate_synthetic({.n_speakers = 8, .n_contents = 100});
  const Metrics m = sid_attack(noise_corpus(base, 16), {.seed = 17}, 18);
  const double n = 80.0, p = 1.0 / 8.0;
  EXPECT_LT(std::abs(m.accuracy - p), 4 * std::sqrt(p * (1 - p) / n));
}

TEST(Separability, RawSyntheticEmbeddings) {
  const data::Corpus c = data::generate_synthetic({});
  // Speaker identity is linearly readable from held-out utterances.
  const ProbeConfig linear{.hidden = {}, .seed = 19};
  EXPECT_GE(sid_attack(c, linear, 20).accuracy, 0.9);
  // content_id mod 4 colours 200 Gaussian content latents arbitrarily, so
  // it needs the hidden layers; judged on unseen speakers.
  const ProbeConfig mlp{.seed = 21};
  EXPECT_GE(sid_attack(c, mlp, 20).accuracy, 0.9);
  EXPECT_GE(run_task(c, data::content_group_labels(c), mlp,
                     data::SplitUnit::kSpeaker, 20).metrics.accuracy,
            0.9);
}

TEST(SidAttack, LaplaceNoiseLowersAccuracy) {
  const data::Corpus c = data::generate_synthetic({});
  const double raw = sid_attack(c, {.seed = 22}, 23).accuracy;
  const data::Corpus noisy = baselines::laplace_anonymize(c, {.epsilon = 0.5, .seed = 24});
  EXPECT_LT(sid_attack(noisy, {.seed = 22}, 23).accuracy, raw);
}
