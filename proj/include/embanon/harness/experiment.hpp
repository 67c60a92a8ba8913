#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "embanon/baselines/laplace.hpp"
#include "embanon/data/corpus.hpp"
#include "embanon/data/manifest.hpp"
#include "embanon/data/sampling.hpp"
#include "embanon/data/synthetic.hpp"
#include "embanon/model/privacy_transformer.hpp"
#include "embanon/probes/probe.hpp"

namespace embanon::harness {

// Either a .pemb file (labels from its sidecar manifest) or a synthetic
// corpus generated in memory.
struct CorpusSource {
  std::filesystem::path path{};
  std::optional<data::SyntheticConfig> synthetic{};
};

enum class ArmKind { kOriginal, kLaplace, kPrivacyTransformer };

struct ArmConfig {
  std::string name{};
  ArmKind kind = ArmKind::kOriginal;
  // kLaplace. The seed defaults to the experiment's anonymize seed.
  baselines::LaplaceConfig laplace{};
  bool laplace_seed_set = false;
  // kPrivacyTransformer: load `checkpoint` when set, otherwise train a model
  // with `model` / `train` on the experiment corpus. Layers and dim always
  // come from the corpus.
  std::filesystem::path checkpoint{};
  model::PrivacyTransformerConfig model{};
  model::TrainOptions train{};
};

enum class LabelSource { kSpeaker, kContentGroup, kManifest };

struct TaskConfig {
  std::string name{};
  LabelSource labels = LabelSource::kSpeaker;
  std::uint32_t groups = 4;    // kContentGroup
  std::string manifest_key{};  // kManifest; defaults to `name`
  data::SplitUnit split = data::SplitUnit::kSpeakerStratified;
};

struct Seeds {
  std::uint64_t split = 0;
  std::uint64_t probe = 0;
  std::uint64_t anonymize = 0;

  bool operator==(const Seeds&) const = default;
};

inline constexpr const char* kSidTask = "sid";

struct ExperimentConfig {
  CorpusSource corpus;
  std::vector<ArmConfig> arms;
  std::vector<TaskConfig> tasks;
  probes::ProbeConfig probe;
  Seeds seeds;
  std::filesystem::path output_dir = "report";

  // At least one arm and one task, unique names, and a speaker-labelled
  // task named "sid". Throws ConfigError.
  void validate() const;
};

// Reads the JSON form of an experiment. Unknown keys are a ConfigError so
// that typos do not silently fall back to defaults. Relative paths are
// resolved against `base_dir`.
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& cfg);
// TOML, or JSON when the extension is .json.
ExperimentConfig load_config(const std::filesystem::path& path);

// 64-bit FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::string arm_kind_name(ArmKind kind);
ArmKind parse_arm_kind(const std::string& name);
std::string split_unit_name(data::SplitUnit unit);
data::SplitUnit parse_split_unit(const std::string& name);

// An anonymization arm ready to run: a Laplace configuration or a loaded /
// trained Privacy Transformer.
struct Arm {
  std::string name{};
  ArmKind kind = ArmKind::kOriginal;
  baselines::LaplaceConfig laplace{};
  std::shared_ptr<const model::PrivacyTransformer> model{};
  std::uint64_t seed = 0;

  // The arm's view of `corpus`; the original arm returns it unchanged.
  data::Corpus apply(const data::Corpus& corpus, std::size_t batch = 64) const;
};

// Loads or trains what the arm needs. Training uses `corpus`.
Arm prepare_arm(const ArmConfig& cfg, const data::Corpus& corpus,
                const Seeds& seeds);

struct LoadedCorpus {
  data::Corpus corpus;
  data::Manifest manifest;
  double seconds = 0.0;
};
LoadedCorpus load_corpus(const CorpusSource& source);

// Labels of a task; throws ConfigError when a manifest map is missing.
data::LabelMap task_labels(const TaskConfig& task, const LoadedCorpus& loaded);

}  // namespace embanon::harness
