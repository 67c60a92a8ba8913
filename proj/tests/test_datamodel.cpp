#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "embanon/data/binary_io.hpp"
#include "embanon/data/corpus.hpp"
#include "embanon/data/manifest.hpp"
#include "embanon/data/pemb.hpp"
#include "embanon/data/sampling.hpp"
#include "embanon/data/synthetic.hpp"
#include "embanon/errors.hpp"

using namespace embanon;
using namespace embanon::data;
namespace fs = std::filesystem;

namespace {

Corpus small_corpus() {
  Corpus c;
  c.layers = 2;
  c.dim = 3;
  c.speakers = {7, 9};
  c.records = {
      {11, 7, 0, {0.5f, -1.25f, 3.0f, 1e-20f, -0.0f, 42.0f}},
      {12, 9, 0, {1.0f, 2.0f, 3.0f, 4.0f, 5.0f, 6.0f}},
      {13, 9, 1, {-6.0f, 0.1f, 0.2f, 0.3f, 0.4f, 1e30f}},
  };
  return c;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("embanon_test_" + name);
}

void patch_u32(std::vector<std::uint8_t>& bytes, std::size_t at,
               std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

}  // namespace

TEST(PoolTimeSeries, ConstantFrames) {
  std::vector<double> frames(4 * 3, 2.5);
  auto pooled = pool_time_series(frames, 3);
  for (double v : pooled) EXPECT_EQ(v, 2.5);
}

TEST(PoolTimeSeries, TwoFrames) {
  auto pooled = pool_time_series(std::vector<double>{0.0, 2.0}, 1);
  ASSERT_EQ(pooled.size(), 1u);
  EXPECT_EQ(pooled[0], 1.0);
}

TEST(PoolTimeSeries, MatchesLoopOracle) {
  numerics::Rng rng(1);
  const std::size_t t = 7, d = 5;
  std::vector<double> frames(t * d);
  for (double& v : frames) v = rng.normal();
  auto pooled = pool_time_series(frames, d);
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (std::size_t f = 0; f < t; ++f) acc += frames[f * d + j];
    EXPECT_EQ(pooled[j], acc / static_cast<double>(t));
  }
}

TEST(PoolTimeSeries, EmptyInput) {
  EXPECT_THROW(pool_time_series(std::vector<double>{}, 4), ContractError);
}

TEST(Pemb, RoundTripIsBitwise) {
  const Corpus c = small_corpus();
  const fs::path path = temp_path("roundtrip.pemb");
  write_corpus(c, path);
  const Corpus back = read_corpus(path);
  EXPECT_EQ(back, c);
  EXPECT_EQ(encode_corpus(back), encode_corpus(c));
  fs::remove(path);
}

TEST(Pemb, RoundTripPreservesSignedZeroBits) {
  const Corpus back = decode_corpus(encode_corpus(small_corpus()));
  EXPECT_TRUE(std::signbit(back.records[0].matrix[4]));
}

TEST(Pemb, HeaderLayout) {
  const auto bytes = encode_corpus(small_corpus());
  ASSERT_EQ(bytes.size(), kPembHeaderSize + 2 * 4 + 3 * pemb_record_size(2, 3));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PEMB");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[8], 2);  // L
  EXPECT_EQ(bytes[12], 3);  // d
  EXPECT_EQ(bytes[16], 2);  // n_speakers
  EXPECT_EQ(bytes[20], 3);  // n_records
  EXPECT_EQ(bytes[24], 7);  // first speaker id
}

TEST(Pemb, BadMagic) {
  auto bytes = encode_corpus(small_corpus());
  bytes[0] = bytes[1] = bytes[2] = bytes[3] = 'X';
  try {
    decode_corpus(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(Pemb, BadVersion) {
  auto bytes = encode_corpus(small_corpus());
  bytes[4] = 2;
  try {
    decode_corpus(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(Pemb, DeclaredRecordsExceedPayload) {
  auto bytes = encode_corpus(small_corpus());
  // Drop the last record, then claim four records.
  bytes.resize(bytes.size() - pemb_record_size(2, 3));
  patch_u32(bytes, 20, 4);
  const std::uint64_t expected = kPembHeaderSize + 2 * 4 + 2 * pemb_record_size(2, 3);
  try {
    decode_corpus(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), expected);
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
}

TEST(Pemb, NonFiniteValueIsDataError) {
  auto bytes = encode_corpus(small_corpus());
  const std::size_t first_value = kPembHeaderSize + 2 * 4 + 16;
  patch_u32(bytes, first_value, 0x7fc00000u);  // NaN
  EXPECT_THROW(decode_corpus(bytes), DataError);
}

TEST(Pemb, TrailingBytes) {
  auto bytes = encode_corpus(small_corpus());
  bytes.push_back(0);
  EXPECT_THROW(decode_corpus(bytes), FormatError);
}

TEST(Pemb, MissingFileIsIoError) {
  EXPECT_THROW(read_corpus(temp_path("does_not_exist.pemb")), IoError);
}

TEST(Manifest, RoundTrip) {
  Manifest m;
  m.name = "toy";
  m.source = "synthetic";
  m.label_maps["content_group"] = {{11, 0}, {12, 3}};
  m.label_maps["emotion"] = {{13, 1}};
  const fs::path path = temp_path("manifest.json");
  write_manifest(m, path);
  EXPECT_EQ(read_manifest(path), m);
  fs::remove(path);
}

TEST(Labels, BuiltInTasks) {
  const Corpus c = small_corpus();
  auto spk = speaker_labels(c);
  EXPECT_EQ(spk.at(12), 9u);
  auto groups = content_group_labels(generate_synthetic({.n_contents = 9}));
  EXPECT_EQ(groups.at(7), 3u);
  EXPECT_EQ(groups.at(8), 0u);
}

TEST(PairSampling, ForcedUniquePair) {
  Corpus c = small_corpus();
  c.records.pop_back();  // one content, two speakers
  numerics::Rng rng(3);
  for (const auto& p : sample_parallel_pairs(c, 20, rng)) {
    std::set<std::uint64_t> ids{p.src.utterance_id, p.tgt.utterance_id};
    EXPECT_EQ(ids, (std::set<std::uint64_t>{11, 12}));
  }
}

TEST(PairSampling, NoRepeatedContentIsUnsatisfiable) {
  Corpus c = small_corpus();
  c.records[1].content_id = 5;
  numerics::Rng rng(4);
  EXPECT_THROW(sample_parallel_pairs(c, 1, rng), UnsatisfiableError);
}

TEST(PairSampling, InvariantsHoldExhaustively) {
  const Corpus c = generate_synthetic({.n_speakers = 6, .n_contents = 10});
  numerics::Rng rng(5);
  for (const auto& p : sample_parallel_pairs(c, 5000, rng)) {
    EXPECT_EQ(p.src.content_id, p.tgt.content_id);
    EXPECT_NE(p.src.speaker_id, p.tgt.speaker_id);
  }
}

TEST(PairSampling, UniformOverContentAndSpeakerPairs) {
  // 3 speakers x 2 contents: 2 contents x 3 unordered pairs, each 1/6.
  const Corpus c = generate_synthetic({.n_speakers = 3, .n_contents = 2,
                                       .layers = 1, .dim = 2});
  const std::size_t draws = 100000;
  numerics::Rng rng(6);
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, std::size_t> cells;
  std::size_t forward = 0;
  for (const auto& p : PairSampler(c).sample(draws, rng)) {
    const auto lo = std::min(p.src.speaker_id, p.tgt.speaker_id);
    const auto hi = std::max(p.src.speaker_id, p.tgt.speaker_id);
    ++cells[{p.src.content_id, lo, hi}];
    if (p.src.speaker_id < p.tgt.speaker_id) ++forward;
  }
  ASSERT_EQ(cells.size(), 6u);
  const double prob = 1.0 / 6.0;
  const double mean = draws * prob;
  const double sigma = std::sqrt(draws * prob * (1 - prob));
  for (const auto& [cell, count] : cells) {
    EXPECT_LT(std::abs(static_cast<double>(count) - mean), 3 * sigma);
  }
  // Orientation is a fair coin.
  EXPECT_LT(std::abs(forward - draws / 2.0), 3 * std::sqrt(draws * 0.25));
}

TEST(Split, AllToTrain) {
  const Corpus c = generate_synthetic({.n_speakers = 3, .n_contents = 4});
  const auto s = split_indices(c, {1.0, 0.0, 0.0}, SplitUnit::kUtterance, 1);
  EXPECT_EQ(s.train.size(), c.records.size());
  EXPECT_TRUE(s.val.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(Split, DisjointAndExhaustive) {
  const Corpus c = generate_synthetic({.n_speakers = 7, .n_contents = 13});
  for (SplitUnit unit : {SplitUnit::kUtterance, SplitUnit::kSpeaker,
                         SplitUnit::kSpeakerStratified}) {
    const auto s = split_indices(c, {0.6, 0.2, 0.2}, unit, 9);
    std::set<std::size_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test})
      for (std::size_t i : *part) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), c.records.size());
  }
}

TEST(Split, SpeakerUnitHasNoSpeakerOverlap) {
  const Corpus c = generate_synthetic({.n_speakers = 10, .n_contents = 5});
  const CorpusSplit s = split(c, {0.6, 0.2, 0.2}, SplitUnit::kSpeaker, 2);
  auto speakers = [](const Corpus& part) {
    std::set<std::uint32_t> out;
    for (const auto& r : part.records) out.insert(r.speaker_id);
    return out;
  };
  const auto a = speakers(s.train), b = speakers(s.val), t = speakers(s.test);
  for (auto x : a) {
    EXPECT_FALSE(b.contains(x));
    EXPECT_FALSE(t.contains(x));
  }
  for (auto x : b) EXPECT_FALSE(t.contains(x));
  EXPECT_EQ(a.size() + b.size() + t.size(), 10u);
}

TEST(Split, StratifiedKeepsEverySpeakerInEveryPart) {
  const Corpus c = generate_synthetic({.n_speakers = 5, .n_contents = 20});
  const CorpusSplit s = split(c, {0.8, 0.1, 0.1}, SplitUnit::kSpeakerStratified, 3);
  EXPECT_EQ(s.train.speakers.size(), 5u);
  EXPECT_EQ(s.val.speakers.size(), 5u);
  EXPECT_EQ(s.test.speakers.size(), 5u);
  EXPECT_EQ(s.test.records.size(), 10u);
}

TEST(Split, DeterministicInSeed) {
  const Corpus c = generate_synthetic({.n_speakers = 4, .n_contents = 9});
  const auto a = split_indices(c, {0.5, 0.25, 0.25}, SplitUnit::kUtterance, 77);
  const auto b = split_indices(c, {0.5, 0.25, 0.25}, SplitUnit::kUtterance, 77);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, EmptyPartIsError) {
  const Corpus c = generate_synthetic({.n_speakers = 2, .n_contents = 1});
  EXPECT_THROW(split_indices(c, {0.5, 0.25, 0.25}, SplitUnit::kSpeaker, 1),
               SplitError);
  EXPECT_THROW(split_indices(c, {0.5, 0.6, 0.0}, SplitUnit::kUtterance, 1),
               SplitError);
}

TEST(Synthetic, DeterministicWithoutNoise) {
  SyntheticConfig cfg{.n_speakers = 3, .n_contents = 4, .noise_sigma = 0.0, .seed = 5};
  const Corpus a = generate_synthetic(cfg);
  const Corpus b = generate_synthetic(cfg);
  EXPECT_EQ(a, b);
  cfg.noise_sigma = 0.3;
  EXPECT_EQ(generate_synthetic(cfg), generate_synthetic(cfg));
}

TEST(Synthetic, SameContentDifferenceIsRankOneAtUnitSpeakerLatent) {
  // Row l of any same-content difference is W_l^s (s_a - s_b): a multiple
  // of one fixed d-vector per layer when the speaker latent is 1-D.
  const SyntheticConfig cfg{.n_speakers = 6, .n_contents = 5, .layers = 3,
                            .dim = 10, .speaker_latent = 1,
                            .content_latent = 4, .noise_sigma = 0.0, .seed = 8};
  const auto factors = synthetic_factors(cfg);
  const std::size_t d = cfg.dim;
  for (std::uint32_t l = 0; l < cfg.layers; ++l) {
    std::vector<double> dir;
    for (std::uint32_t m = 0; m < cfg.n_contents; ++m) {
      const auto base = synthetic_matrix(cfg, factors, 0, m);
      for (std::uint32_t k = 1; k < cfg.n_speakers; ++k) {
        const auto other = synthetic_matrix(cfg, factors, k, m);
        std::vector<double> diff(d);
        for (std::size_t i = 0; i < d; ++i) diff[i] = other[l * d + i] - base[l * d + i];
        if (dir.empty()) {
          dir = diff;
          continue;
        }
        double dot = 0, nn = 0;
        for (std::size_t i = 0; i < d; ++i) {
          dot += diff[i] * dir[i];
          nn += dir[i] * dir[i];
        }
        double residual = 0;
        for (std::size_t i = 0; i < d; ++i)
          residual = std::max(residual, std::abs(diff[i] - dot / nn * dir[i]));
        EXPECT_LT(residual, 1e-9);
      }
    }
  }
}

TEST(Synthetic, ShapeAndIds) {
  const Corpus c = generate_synthetic({});
  EXPECT_EQ(c.records.size(), 40u * 200u);
  EXPECT_EQ(c.layers, 4u);
  EXPECT_EQ(c.dim, 32u);
  EXPECT_EQ(c.speakers.size(), 40u);
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.records[201].speaker_id, 101u);
  EXPECT_EQ(c.records[201].content_id, 1u);
}

TEST(Synthetic, InvalidConfig) {
  EXPECT_THROW(generate_synthetic({.n_speakers = 1}), ConfigError);
  EXPECT_THROW(generate_synthetic({.noise_sigma = -1.0}), ConfigError);
}

TEST(Corpus, ToTensorAndBack) {
  const Corpus c = small_corpus();
  const auto t = to_tensor(c);
  EXPECT_EQ(t.shape(), (numerics::Shape{3, 2, 3}));
  EXPECT_EQ(with_matrices(c, t), c);
}
