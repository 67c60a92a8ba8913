#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "embanon/data/corpus.hpp"

namespace embanon::data {

// .pemb layout (little-endian):
//   "PEMB" | u16 version=1 | u16 reserved=0 | u32 L | u32 d
//   | u32 n_speakers | u32 n_records
//   | n_speakers x u32 speaker_id
//   | n_records x (u64 utterance_id | u32 speaker_id | u32 content_id
//                  | L*d x f32, layer-major)
inline constexpr std::uint16_t kPembVersion = 1;
inline constexpr std::size_t kPembHeaderSize = 24;

std::size_t pemb_record_size(std::uint32_t layers, std::uint32_t dim);

std::vector<std::uint8_t> encode_corpus(const Corpus& corpus);
// Throws FormatError (bad magic/version, truncation, trailing bytes) or
// DataError (non-finite values, unknown speaker).
Corpus decode_corpus(std::span<const std::uint8_t> bytes);

void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus(const std::filesystem::path& path);

}  // namespace embanon::data
