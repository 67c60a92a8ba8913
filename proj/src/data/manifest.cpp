#include "embanon/data/manifest.hpp"

#include <fstream>
#include <json.hpp>

#include "embanon/errors.hpp"

namespace embanon::data {

std::filesystem::path manifest_path_for(const std::filesystem::path& pemb) {
  std::filesystem::path p = pemb;
  p += ".json";
  return p;
}

void write_manifest(const Manifest& manifest,
                    const std::filesystem::path& path) {
  nlohmann::json maps = nlohmann::json::object();
  for (const auto& [task, labels] : manifest.label_maps) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& [utt, label] : labels) m[std::to_string(utt)] = label;
    maps[task] = std::move(m);
  }
  nlohmann::json j = {{"name", manifest.name},
                      {"source", manifest.source},
                      {"label_maps", std::move(maps)}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what(), e.byte);
  }
  Manifest m;
  try {
    m.name = j.value("name", "");
    m.source = j.value("source", "");
    if (j.contains("label_maps")) {
      for (const auto& [task, labels] : j.at("label_maps").items()) {
        LabelMap lm;
        for (const auto& [utt, label] : labels.items()) {
          lm[std::stoull(utt)] = label.get<std::uint32_t>();
        }
        m.label_maps[task] = std::move(lm);
      }
    }
  } catch (const std::exception& e) {
    throw DataError("manifest '" + path.string() + "' has invalid contents: " +
                    e.what());
  }
  return m;
}

LabelMap speaker_labels(const Corpus& corpus) {
  LabelMap m;
  for (const auto& r : corpus.records) m[r.utterance_id] = r.speaker_id;
  return m;
}

LabelMap content_group_labels(const Corpus& corpus, std::uint32_t groups) {
  if (groups == 0) throw ContractError("content groups must be positive");
  LabelMap m;
  for (const auto& r : corpus.records) m[r.utterance_id] = r.content_id % groups;
  return m;
}

}  // namespace embanon::data
