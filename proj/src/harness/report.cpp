#include "embanon/harness/report.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "embanon/errors.hpp"
#include "embanon/harness/bench.hpp"

namespace embanon::harness {

using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const TaskResult* find_task(const ArmResult& arm, const std::string& task) {
  for (const TaskResult& t : arm.tasks) {
    if (t.task == task) return &t;
  }
  return nullptr;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Keeps free text from breaking a markdown table row.
std::string cell_text(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n' || c == '\r') {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string column_title(const std::string& task, const char* metric) {
  if (task == kSidTask) return std::string("SID ") + metric + " ↓";
  return task + " " + metric;
}

json metrics_to_json(const probes::Metrics& m) {
  return {{"classes", m.classes},     {"confusion", m.confusion}, {"accuracy", m.accuracy},
          {"macro_f1", m.macro_f1},   {"micro_f1", m.micro_f1},   {"precision", m.precision},
          {"recall", m.recall},       {"f1", m.f1}};
}

probes::Metrics metrics_from_json(const json& j) {
  probes::Metrics m;
  j.at("classes").get_to(m.classes);
  j.at("confusion").get_to(m.confusion);
  j.at("accuracy").get_to(m.accuracy);
  j.at("macro_f1").get_to(m.macro_f1);
  j.at("micro_f1").get_to(m.micro_f1);
  j.at("precision").get_to(m.precision);
  j.at("recall").get_to(m.recall);
  j.at("f1").get_to(m.f1);
  return m;
}

}  // namespace

bool same_results(const ExperimentReport& a, const ExperimentReport& b) {
  auto strip = [](ExperimentReport r) {
    r.extraction_seconds = 0.0;
    for (ArmResult& arm : r.arms) {
      arm.anonymize_seconds = 0.0;
      arm.prepare_seconds = 0.0;
      arm.peak_rss_bytes = 0;
    }
    return r;
  };
  return strip(a) == strip(b);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentReport report;
  for (const TaskConfig& t : cfg.tasks) report.tasks.push_back(t.name);
  report.provenance = {config_hash(cfg), cfg.seeds, kVersion};

  const LoadedCorpus loaded = load_corpus(cfg.corpus);
  report.extraction_seconds = loaded.seconds;
  spdlog::info("corpus: {} records, {} speakers, {} x {}", loaded.corpus.records.size(),
               loaded.corpus.speakers.size(), loaded.corpus.layers, loaded.corpus.dim);
  std::vector<data::LabelMap> labels;
  for (const TaskConfig& t : cfg.tasks) labels.push_back(task_labels(t, loaded));

  probes::ProbeConfig probe = cfg.probe;
  probe.seed = cfg.seeds.probe;
  for (const ArmConfig& arm_cfg : cfg.arms) {
    ArmResult result;
    result.name = arm_cfg.name;
    result.kind = arm_cfg.kind;
    try {
      auto t0 = std::chrono::steady_clock::now();
      const Arm arm = prepare_arm(arm_cfg, loaded.corpus, cfg.seeds);
      result.prepare_seconds = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      const data::Corpus view = arm.apply(loaded.corpus);
      result.anonymize_seconds = seconds_since(t0);
      for (std::size_t i = 0; i < cfg.tasks.size(); ++i) {
        const probes::TaskRun run =
            probes::run_task(view, labels[i], probe, cfg.tasks[i].split, cfg.seeds.split);
        result.tasks.push_back({cfg.tasks[i].name, run.metrics, run.best_epoch});
        spdlog::info("arm {} task {}: accuracy {:.4f}, macro-F1 {:.4f}", arm_cfg.name,
                     cfg.tasks[i].name, run.metrics.accuracy, run.metrics.macro_f1);
      }
    } catch (const std::exception& e) {
      result.ok = false;
      result.error = e.what();
      spdlog::error("arm {} failed: {}", arm_cfg.name, e.what());
    }
    result.peak_rss_bytes = peak_rss_bytes();
    report.arms.push_back(std::move(result));
  }
  return report;
}

json report_to_json(const ExperimentReport& report) {
  json arms = json::array();
  for (const ArmResult& a : report.arms) {
    json tasks = json::array();
    for (const TaskResult& t : a.tasks) {
      tasks.push_back({{"task", t.task},
                       {"best_epoch", t.best_epoch},
                       {"metrics", metrics_to_json(t.metrics)}});
    }
    arms.push_back({{"name", a.name},
                    {"kind", arm_kind_name(a.kind)},
                    {"ok", a.ok},
                    {"error", a.error},
                    {"tasks", std::move(tasks)},
                    {"anonymize_seconds", a.anonymize_seconds},
                    {"prepare_seconds", a.prepare_seconds},
                    {"peak_rss_bytes", a.peak_rss_bytes}});
  }
  const Provenance& p = report.provenance;
  return {{"tasks", report.tasks},
          {"arms", std::move(arms)},
          {"extraction_seconds", report.extraction_seconds},
          {"provenance",
           {{"config_hash", p.config_hash},
            {"seeds",
             {{"split", p.seeds.split},
              {"probe", p.seeds.probe},
              {"anonymize", p.seeds.anonymize}}},
            {"version", p.version}}}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  try {
    j.at("tasks").get_to(r.tasks);
    j.at("extraction_seconds").get_to(r.extraction_seconds);
    for (const json& a : j.at("arms")) {
      ArmResult arm;
      a.at("name").get_to(arm.name);
      arm.kind = parse_arm_kind(a.at("kind").get<std::string>());
      a.at("ok").get_to(arm.ok);
      a.at("error").get_to(arm.error);
      a.at("anonymize_seconds").get_to(arm.anonymize_seconds);
      a.at("prepare_seconds").get_to(arm.prepare_seconds);
      a.at("peak_rss_bytes").get_to(arm.peak_rss_bytes);
      for (const json& t : a.at("tasks")) {
        arm.tasks.push_back({t.at("task").get<std::string>(),
                             metrics_from_json(t.at("metrics")),
                             t.at("best_epoch").get<std::size_t>()});
      }
      r.arms.push_back(std::move(arm));
    }
    const json& p = j.at("provenance");
    p.at("config_hash").get_to(r.provenance.config_hash);
    p.at("version").get_to(r.provenance.version);
    const json& s = p.at("seeds");
    s.at("split").get_to(r.provenance.seeds.split);
    s.at("probe").get_to(r.provenance.seeds.probe);
    s.at("anonymize").get_to(r.provenance.seeds.anonymize);
  } catch (const json::exception& e) {
    throw DataError(std::string("report JSON has invalid contents: ") + e.what());
  }
  return r;
}

std::string render_markdown(const ExperimentReport& report) {
  std::ostringstream md;
  const Provenance& p = report.provenance;
  md << "# Experiment report\n\n";
  md << "Config hash `" << p.config_hash << "`, seeds split=" << p.seeds.split
     << " probe=" << p.seeds.probe << " anonymize=" << p.seeds.anonymize << ", version "
     << p.version << ".\n\n";

  md << "## Privacy and utility (test-set %, ↓ = lower is better)\n\n| Arm |";
  for (const std::string& t : report.tasks) {
    md << ' ' << column_title(t, "Acc.") << " | " << column_title(t, "F1") << " |";
  }
  md << "\n|---|";
  for (std::size_t i = 0; i < report.tasks.size(); ++i) md << "---:|---:|";
  md << '\n';
  for (const ArmResult& a : report.arms) {
    md << "| " << cell_text(a.name) << " |";
    for (const std::string& t : report.tasks) {
      if (const TaskResult* r = find_task(a, t)) {
        md << ' ' << fixed(100 * r->metrics.accuracy, 2) << " | "
           << fixed(100 * r->metrics.macro_f1, 2) << " |";
      } else {
        md << " — | — |";
      }
    }
    md << '\n';
  }

  bool any_failed = false;
  for (const ArmResult& a : report.arms) any_failed = any_failed || !a.ok;
  if (any_failed) {
    md << "\nFailed arms:\n\n";
    for (const ArmResult& a : report.arms) {
      if (!a.ok) md << "- " << cell_text(a.name) << ": " << cell_text(a.error) << '\n';
    }
  }

  md << "\n## Efficiency\n\n";
  md << "| Method | Time (s) | Peak RSS (GB) |\n|---|---:|---:|\n";
  md << "| Feature extraction (corpus load) | " << fixed(report.extraction_seconds, 3)
     << " | — |\n";
  for (const ArmResult& a : report.arms) {
    md << "| " << cell_text(a.name) << " | " << fixed(a.anonymize_seconds, 3) << " | "
       << fixed(static_cast<double>(a.peak_rss_bytes) / 1e9, 3) << " |\n";
  }
  md << "\nTimes cover the anonymization pass only; peak RSS is the process "
        "high-water mark after each arm.\n";
  return md.str();
}

std::string render_csv(const ExperimentReport& report) {
  std::ostringstream csv;
  csv << "arm,task,metric,value\n";
  for (const ArmResult& a : report.arms) {
    for (const std::string& t : report.tasks) {
      const TaskResult* r = find_task(a, t);
      const std::pair<const char*, double> values[] = {
          {"accuracy", r ? r->metrics.accuracy : 0.0},
          {"macro_f1", r ? r->metrics.macro_f1 : 0.0}};
      for (const auto& [metric, value] : values) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", value);
        csv << csv_field(a.name) << ',' << csv_field(t) << ',' << metric << ','
            << (r ? buf : "NA") << '\n';
      }
    }
  }
  return csv.str();
}

std::string render_json(const ExperimentReport& report) {
  return report_to_json(report).dump(2) + "\n";
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "json") return ReportFormat::kJson;
  throw ConfigError("unknown report format '" + name + "' (expected markdown, csv or json)");
}

std::string render(const ExperimentReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::kMarkdown: return render_markdown(report);
    case ReportFormat::kCsv: return render_csv(report);
    case ReportFormat::kJson: return render_json(report);
  }
  throw ContractError("unknown report format");
}

void emit_report(const ExperimentReport& report, ReportFormat format,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << render(report, format);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_report_files(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  emit_report(report, ReportFormat::kJson, dir / "report.json");
  emit_report(report, ReportFormat::kMarkdown, dir / "report.md");
  emit_report(report, ReportFormat::kCsv, dir / "report.csv");
}

}  // namespace embanon::harness
