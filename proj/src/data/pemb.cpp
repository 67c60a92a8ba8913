#include "embanon/data/pemb.hpp"

#include <cmath>
#include <unordered_set>

#include "embanon/data/binary_io.hpp"
#include "embanon/errors.hpp"

namespace embanon::data {

std::size_t pemb_record_size(std::uint32_t layers, std::uint32_t dim) {
  return 16 + 4 * static_cast<std::size_t>(layers) * dim;
}

std::vector<std::uint8_t> encode_corpus(const Corpus& corpus) {
  corpus.validate();
  ByteWriter w;
  w.bytes("PEMB");
  w.u16(kPembVersion);
  w.u16(0);
  w.u32(corpus.layers);
  w.u32(corpus.dim);
  w.u32(static_cast<std::uint32_t>(corpus.speakers.size()));
  w.u32(static_cast<std::uint32_t>(corpus.records.size()));
  for (std::uint32_t s : corpus.speakers) w.u32(s);
  for (const UtteranceEmbedding& r : corpus.records) {
    w.u64(r.utterance_id);
    w.u32(r.speaker_id);
    w.u32(r.content_id);
    for (float v : r.matrix) w.f32(v);
  }
  return w.take();
}

Corpus decode_corpus(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4, "magic") != "PEMB") {
    throw FormatError("not a .pemb file: bad magic", 0);
  }
  const std::uint64_t version_at = r.offset();
  const std::uint16_t version = r.u16("version");
  if (version != kPembVersion) {
    throw FormatError("unsupported .pemb version " + std::to_string(version),
                      version_at);
  }
  const std::uint64_t reserved_at = r.offset();
  if (r.u16("reserved") != 0) {
    throw FormatError("reserved header field must be zero", reserved_at);
  }
  Corpus c;
  const std::uint64_t dims_at = r.offset();
  c.layers = r.u32("layer count");
  c.dim = r.u32("embedding width");
  if (c.layers == 0 || c.dim == 0) {
    throw FormatError("layer count and width must be positive", dims_at);
  }
  if (static_cast<std::uint64_t>(c.layers) * c.dim > (std::uint64_t{1} << 36)) {
    throw FormatError("implausible embedding dimensions", dims_at);
  }
  const std::uint32_t n_speakers = r.u32("speaker count");
  const std::uint32_t n_records = r.u32("record count");

  c.speakers.reserve(std::min<std::uint64_t>(n_speakers, r.remaining() / 4));
  std::unordered_set<std::uint32_t> pool;
  for (std::uint32_t i = 0; i < n_speakers; ++i) {
    const std::uint64_t at = r.offset();
    const std::uint32_t s = r.u32("speaker id");
    if (!pool.insert(s).second) {
      throw FormatError("duplicate speaker id " + std::to_string(s), at);
    }
    c.speakers.push_back(s);
  }

  const std::size_t record_size = pemb_record_size(c.layers, c.dim);
  const std::size_t n_values = c.matrix_size();
  c.records.reserve(std::min<std::uint64_t>(n_records, r.remaining() / record_size));
  for (std::uint32_t i = 0; i < n_records; ++i) {
    const std::uint64_t record_at = r.offset();
    r.need(record_size, "record " + std::to_string(i));
    UtteranceEmbedding u;
    u.utterance_id = r.u64("utterance id");
    u.speaker_id = r.u32("speaker id");
    u.content_id = r.u32("content id");
    if (!pool.contains(u.speaker_id)) {
      throw DataError("record " + std::to_string(i) + " at byte offset " +
                      std::to_string(record_at) + " references speaker " +
                      std::to_string(u.speaker_id) + " outside the pool");
    }
    u.matrix.resize(n_values);
    for (std::size_t k = 0; k < n_values; ++k) {
      const float v = r.f32("embedding value");
      if (!std::isfinite(v)) {
        throw DataError("record " + std::to_string(i) +
                        " contains a non-finite value at byte offset " +
                        std::to_string(r.offset() - 4));
      }
      u.matrix[k] = v;
    }
    c.records.push_back(std::move(u));
  }
  if (r.remaining() != 0) {
    throw FormatError("unexpected trailing bytes after last record", r.offset());
  }
  return c;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_bytes(path, encode_corpus(corpus));
}

Corpus read_corpus(const std::filesystem::path& path) {
  return decode_corpus(read_file_bytes(path));
}

}  // namespace embanon::data
