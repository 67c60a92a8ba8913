#include "embanon/data/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "embanon/errors.hpp"

namespace embanon::data {

PairSampler::PairSampler(const Corpus& corpus) : corpus_(&corpus) {
  std::vector<std::size_t> all(corpus.records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  build(all);
}

PairSampler::PairSampler(const Corpus& corpus,
                         std::span<const std::size_t> records)
    : corpus_(&corpus) {
  build(records);
}

void PairSampler::build(std::span<const std::size_t> records) {
  // Ordered maps keep the cell layout independent of hash seeds.
  std::map<std::uint32_t, std::map<std::uint32_t, std::vector<std::size_t>>>
      by_content;
  for (std::size_t i : records) {
    const auto& r = corpus_->records.at(i);
    by_content[r.content_id][r.speaker_id].push_back(i);
  }
  for (auto& [content, speakers] : by_content) {
    if (speakers.size() < 2) continue;
    ContentCell cell;
    for (auto& [speaker, takes] : speakers) cell.takes.push_back(std::move(takes));
    contents_.push_back(std::move(cell));
  }
}

std::vector<std::array<std::size_t, 2>> PairSampler::sample_indices(
    std::size_t n, numerics::Rng& rng) const {
  if (contents_.empty()) {
    throw UnsatisfiableError(
        "no content is spoken by two or more speakers; cannot form parallel "
        "pairs");
  }
  std::vector<std::array<std::size_t, 2>> out;
  out.reserve(n);
  for (std::size_t p = 0; p < n; ++p) {
    const ContentCell& cell = contents_[rng.uniform_index(contents_.size())];
    const std::size_t k = cell.takes.size();
    // Unordered pair drawn uniformly, then oriented at random: equivalent to
    // an ordered pair of distinct speakers drawn uniformly.
    const std::size_t a = rng.uniform_index(k);
    std::size_t b = rng.uniform_index(k - 1);
    if (b >= a) ++b;
    const auto& ta = cell.takes[a];
    const auto& tb = cell.takes[b];
    out.push_back({ta[rng.uniform_index(ta.size())],
                   tb[rng.uniform_index(tb.size())]});
  }
  return out;
}

std::vector<ParallelPair> PairSampler::sample(std::size_t n,
                                              numerics::Rng& rng) const {
  std::vector<ParallelPair> out;
  out.reserve(n);
  for (const auto& [s, t] : sample_indices(n, rng)) {
    out.push_back({corpus_->records[s], corpus_->records[t]});
  }
  return out;
}

std::vector<ParallelPair> sample_parallel_pairs(const Corpus& corpus,
                                                std::size_t n,
                                                numerics::Rng& rng) {
  return PairSampler(corpus).sample(n, rng);
}

namespace {

void validate_ratios(const std::array<double, 3>& ratios) {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw SplitError("split ratios must be finite and non-negative");
    }
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw SplitError("split ratios must sum to 1, got " + std::to_string(total));
  }
}

std::array<std::size_t, 3> part_sizes(std::size_t n,
                                      const std::array<double, 3>& ratios) {
  std::size_t n0 = static_cast<std::size_t>(std::llround(ratios[0] * n));
  std::size_t n1 = static_cast<std::size_t>(std::llround(ratios[1] * n));
  n0 = std::min(n0, n);
  n1 = std::min(n1, n - n0);
  std::size_t n2 = n - n0 - n1;
  // A zero-ratio test part stays empty whatever the rounding did.
  if (ratios[2] == 0.0 && n2 > 0) {
    (ratios[1] > 0.0 ? n1 : n0) += n2;
    n2 = 0;
  }
  return {n0, n1, n2};
}

void assign(std::vector<std::size_t>& items, const std::array<double, 3>& ratios,
            numerics::Rng& rng, std::array<std::vector<std::size_t>*, 3> parts) {
  rng.shuffle(items);
  const auto sizes = part_sizes(items.size(), ratios);
  std::size_t pos = 0;
  for (int p = 0; p < 3; ++p) {
    for (std::size_t i = 0; i < sizes[p]; ++i) parts[p]->push_back(items[pos++]);
  }
}

}  // namespace

SplitIndices split_indices(const Corpus& corpus, std::array<double, 3> ratios,
                           SplitUnit unit, std::uint64_t seed) {
  validate_ratios(ratios);
  numerics::Rng rng(seed);
  SplitIndices out;
  std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.val, &out.test};
  const std::size_t n = corpus.records.size();

  switch (unit) {
    case SplitUnit::kUtterance: {
      std::vector<std::size_t> items(n);
      for (std::size_t i = 0; i < n; ++i) items[i] = i;
      assign(items, ratios, rng, parts);
      break;
    }
    case SplitUnit::kSpeaker: {
      std::map<std::uint32_t, std::vector<std::size_t>> by_speaker;
      for (std::size_t i = 0; i < n; ++i)
        by_speaker[corpus.records[i].speaker_id].push_back(i);
      std::vector<std::size_t> speakers;
      std::vector<std::uint32_t> ids;
      for (const auto& [id, recs] : by_speaker) {
        speakers.push_back(ids.size());
        ids.push_back(id);
      }
      SplitIndices by_group;
      assign(speakers, ratios, rng, {&by_group.train, &by_group.val, &by_group.test});
      for (int p = 0; p < 3; ++p) {
        auto& src = *std::array{&by_group.train, &by_group.val, &by_group.test}[p];
        for (std::size_t g : src) {
          const auto& recs = by_speaker[ids[g]];
          parts[p]->insert(parts[p]->end(), recs.begin(), recs.end());
        }
      }
      break;
    }
    case SplitUnit::kSpeakerStratified: {
      std::map<std::uint32_t, std::vector<std::size_t>> by_speaker;
      for (std::size_t i = 0; i < n; ++i)
        by_speaker[corpus.records[i].speaker_id].push_back(i);
      for (auto& [id, recs] : by_speaker) assign(recs, ratios, rng, parts);
      break;
    }
  }

  const char* names[3] = {"train", "validation", "test"};
  for (int p = 0; p < 3; ++p) {
    std::sort(parts[p]->begin(), parts[p]->end());
    if (ratios[p] > 0.0 && parts[p]->empty()) {
      throw SplitError(std::string("split would leave the ") + names[p] +
                       " part empty");
    }
  }
  return out;
}

CorpusSplit split(const Corpus& corpus, std::array<double, 3> ratios,
                  SplitUnit unit, std::uint64_t seed) {
  const SplitIndices idx = split_indices(corpus, ratios, unit, seed);
  return {subset(corpus, idx.train), subset(corpus, idx.val),
          subset(corpus, idx.test)};
}

}  // namespace embanon::data
