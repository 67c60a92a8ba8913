#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "embanon/baselines/laplace.hpp"
#include "embanon/data/synthetic.hpp"
#include "embanon/errors.hpp"
#include "test_util.hpp"

using namespace embanon;
using namespace embanon::baselines;
using numerics::Rng;
using numerics::Tensor;

namespace {

// Largest gap between the empirical CDF of `xs` and the Laplace CDF.
double ks_statistic(std::vector<double> xs, double b) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = laplace_cdf(xs[i], b);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

}  // namespace

TEST(Laplace, MedianMapsToZero) {
  EXPECT_EQ(laplace_from_uniform(0.0, 0.7), 0.0);
  EXPECT_GT(laplace_from_uniform(0.25, 1.0), 0.0);
  EXPECT_NEAR(laplace_from_uniform(0.25, 1.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(laplace_from_uniform(-0.25, 1.0), -std::log(2.0), 1e-15);
}

TEST(Laplace, CdfInvertsSampler) {
  for (double u : {-0.49, -0.3, -0.01, 0.02, 0.3, 0.499}) {
    EXPECT_NEAR(laplace_cdf(laplace_from_uniform(u, 0.4), 0.4), u + 0.5, 1e-12);
  }
}

TEST(Laplace, MomentsMatch) {
  const double b = 0.8;
  const std::size_t n = 1000000;
  Rng rng(1);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = sample_laplace(b, rng);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_LT(std::abs(mean), 4 * b / 1000);
  EXPECT_LT(std::abs(var - 2 * b * b), 0.05 * 2 * b * b);
}

TEST(Laplace, ConfigScale) {
  EXPECT_NEAR(LaplaceConfig{.epsilon = 15}.scale(), 2.0 / 15.0, 1e-15);
  EXPECT_NEAR(LaplaceConfig{.epsilon = 15}.scale(), 0.133333, 1e-6);
  EXPECT_THROW(LaplaceConfig{.epsilon = 0}.validate(), ConfigError);
  EXPECT_THROW((LaplaceConfig{.clip_lo = 1, .clip_hi = 1}.validate()), ConfigError);
}

TEST(LaplaceAnonymize, ClipsBeforeNoise) {
  const Tensor z({1, 1, 3}, {1.5, -7.0, 0.25});
  LaplaceConfig cfg{.epsilon = 1e12, .seed = 3};
  const Tensor out = laplace_anonymize(z, cfg);
  EXPECT_NEAR(out.at(0), 1.0, 1e-9);
  EXPECT_NEAR(out.at(1), -1.0, 1e-9);
  EXPECT_NEAR(out.at(2), 0.25, 1e-9);
}

TEST(LaplaceAnonymize, VanishingNoiseLimit) {
  // At epsilon = 1e9 the scale is 2e-9, so deviations are a few 1e-9;
  // exp(-20) bounds the chance that one exceeds 20 scales.
  Rng rng(4);
  const Tensor z = embanon::testing::random_tensor({10, 4, 8}, rng, 2.0, false);
  const LaplaceConfig cfg{.epsilon = 1e9, .seed = 5};
  const Tensor out = laplace_anonymize(z, cfg);
  for (std::size_t i = 0; i < z.numel(); ++i) {
    EXPECT_LE(std::abs(out.at(i) - std::clamp(z.at(i), -1.0, 1.0)), 20 * cfg.scale());
  }
  const LaplaceConfig tiny{.epsilon = 1e12, .seed = 5};
  const Tensor out2 = laplace_anonymize(z, tiny);
  for (std::size_t i = 0; i < z.numel(); ++i) {
    EXPECT_NEAR(out2.at(i), std::clamp(z.at(i), -1.0, 1.0), 1e-9);
  }
}

TEST(LaplaceAnonymize, NoiseIsLaplaceDistributed) {
  // Inputs inside the clip range so output - input is pure noise.
  const std::size_t n = 100000;
  const Tensor z = Tensor::full({n / 4, 1, 4}, 0.3);
  const LaplaceConfig cfg{.epsilon = 15, .seed = 6};
  const Tensor out = laplace_anonymize(z, cfg);
  std::vector<double> noise(n);
  for (std::size_t i = 0; i < n; ++i) noise[i] = out.at(i) - 0.3;
  EXPECT_LT(ks_statistic(noise, cfg.scale()), 0.01);
}

TEST(LaplaceAnonymize, DimensionsAreIndependent) {
  const std::size_t n = 100000, d = 4;
  const Tensor z = Tensor::zeros({n, 1, d});
  const Tensor out = laplace_anonymize(z, {.epsilon = 2, .seed = 7});
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double x = out.at(i * d + a), y = out.at(i * d + b);
        sa += x;
        sb += y;
        saa += x * x;
        sbb += y * y;
        sab += x * y;
      }
      const double cov = sab / n - sa / n * sb / n;
      const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
      EXPECT_LT(std::abs(corr), 0.01) << a << "," << b;
    }
  }
}

TEST(LaplaceAnonymize, DeterministicInSeed) {
  const data::Corpus c = data::generate_synthetic({.n_speakers = 3, .n_contents = 4});
  const LaplaceConfig cfg{.epsilon = 15, .seed = 8};
  EXPECT_EQ(laplace_anonymize(c, cfg), laplace_anonymize(c, cfg));
  EXPECT_NE(laplace_anonymize(c, cfg), laplace_anonymize(c, {.epsilon = 15, .seed = 9}));
}

TEST(LaplaceAnonymize, CorpusMatchesTensorPath) {
  const data::Corpus c = data::generate_synthetic({.n_speakers = 2, .n_contents = 3});
  const LaplaceConfig cfg{.epsilon = 3, .seed = 10};
  const data::Corpus via_tensor = data::with_matrices(c, laplace_anonymize(data::to_tensor(c), cfg));
  EXPECT_EQ(laplace_anonymize(c, cfg), via_tensor);
}

TEST(LaplaceAnonymize, NonFiniteInput) {
  const Tensor z({1, 1, 2}, {0.0, std::nan("")});
  EXPECT_THROW(laplace_anonymize(z, {}), DataError);
  data::Corpus c = data::generate_synthetic({.n_speakers = 2, .n_contents = 1});
  c.records[1].matrix[3] = INFINITY;
  EXPECT_THROW(laplace_anonymize(c, {}), DataError);
}
