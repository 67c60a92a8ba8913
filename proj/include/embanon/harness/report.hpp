#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "embanon/harness/experiment.hpp"
#include "embanon/probes/metrics.hpp"

namespace embanon::harness {

struct TaskResult {
  std::string task;
  probes::Metrics metrics;
  std::size_t best_epoch = 0;

  bool operator==(const TaskResult&) const = default;
};

struct ArmResult {
  std::string name;
  ArmKind kind = ArmKind::kOriginal;
  bool ok = true;
  // Cause of the failure when !ok; `tasks` then holds what finished.
  std::string error{};
  std::vector<TaskResult> tasks{};
  // Wall time of the anonymization pass only.
  double anonymize_seconds = 0.0;
  // Training or checkpoint loading, before the anonymization pass.
  double prepare_seconds = 0.0;
  // Process peak resident set size after the arm, in bytes.
  std::uint64_t peak_rss_bytes = 0;

  bool operator==(const ArmResult&) const = default;
};

struct Provenance {
  std::string config_hash;
  Seeds seeds;
  std::string version;

  bool operator==(const Provenance&) const = default;
};

struct ExperimentReport {
  std::vector<std::string> tasks;
  std::vector<ArmResult> arms;
  // Corpus loading / generation, the stand-in for feature extraction.
  double extraction_seconds = 0.0;
  Provenance provenance;

  bool operator==(const ExperimentReport&) const = default;
};

// Equality ignoring wall-time and memory fields.
bool same_results(const ExperimentReport& a, const ExperimentReport& b);

// Arms run one after another; every arm and task uses the same splits.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

std::string render_markdown(const ExperimentReport& report);
// Header "arm,task,metric,value"; one row per (arm, task, metric) with the
// metrics accuracy and macro_f1. A failed cell has the value "NA".
std::string render_csv(const ExperimentReport& report);
std::string render_json(const ExperimentReport& report);

enum class ReportFormat { kMarkdown, kCsv, kJson };
ReportFormat parse_report_format(const std::string& name);
std::string render(const ExperimentReport& report, ReportFormat format);

// Throws IoError when the file cannot be written.
void emit_report(const ExperimentReport& report, ReportFormat format,
                 const std::filesystem::path& path);
// Writes report.json, report.md and report.csv into `dir`.
void write_report_files(const ExperimentReport& report,
                        const std::filesystem::path& dir);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace embanon::harness
