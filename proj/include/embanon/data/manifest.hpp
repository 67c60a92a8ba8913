#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "embanon/data/corpus.hpp"

namespace embanon::data {

// utterance_id -> class label
using LabelMap = std::map<std::uint64_t, std::uint32_t>;

// Sidecar JSON next to a .pemb file:
// {"name": ..., "source": ..., "label_maps": {task: {utterance_id: label}}}
struct Manifest {
  std::string name;
  std::string source;
  std::map<std::string, LabelMap> label_maps;

  bool operator==(const Manifest&) const = default;
};

std::filesystem::path manifest_path_for(const std::filesystem::path& pemb);

void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

LabelMap speaker_labels(const Corpus& corpus);
// content_id mod `groups`; the synthetic stand-in for an intent-style task.
LabelMap content_group_labels(const Corpus& corpus, std::uint32_t groups = 4);

inline constexpr const char* kSpeakerTask = "sid";
inline constexpr const char* kContentGroupTask = "content_group";

}  // namespace embanon::data
