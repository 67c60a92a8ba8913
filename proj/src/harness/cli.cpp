#include "embanon/harness/cli.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <sstream>

#include "embanon/baselines/laplace.hpp"
#include "embanon/data/pemb.hpp"
#include "embanon/errors.hpp"
#include "embanon/harness/bench.hpp"
#include "embanon/harness/experiment.hpp"
#include "embanon/harness/report.hpp"
#include "embanon/numerics/kernels.hpp"

namespace embanon::harness {

namespace {

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string log_level = "info";
};

struct GenOptions {
  data::SyntheticConfig synthetic;
  std::string out;
};

struct TrainCliOptions {
  std::string in, out, report;
  model::PrivacyTransformerConfig model;
  model::TrainOptions train;
  std::string reduction = "utterance";
};

struct AnonymizeOptions {
  std::string in, out, checkpoint;
  double laplace = 0.0;
  std::size_t batch = 64;
};

struct ProbeOptions {
  std::string in, out, task = kSidTask, labels, split;
  std::uint32_t groups = 4;
  probes::ProbeConfig probe;
  std::string weighting = "softmax";
};

struct EvalOptions {
  std::string config, out_dir;
};

struct BenchCliOptions {
  std::string in, checkpoint;
  double laplace = 0.0;
  bool paper_model = false;
  BenchOptions bench;
};

struct ReportOptions {
  std::string in, out, format = "markdown";
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
}

std::string metrics_line(const std::string& name, const probes::Metrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s: accuracy %.4f, macro-F1 %.4f (%zu classes)",
                name.c_str(), m.accuracy, m.macro_f1, m.classes.size());
  return buf;
}

// Copies the sidecar manifest so labels follow an anonymized corpus.
void copy_manifest(const std::string& in, const std::string& out) {
  const auto src = data::manifest_path_for(in);
  if (!std::filesystem::exists(src)) return;
  data::Manifest m = data::read_manifest(src);
  m.source = in;
  data::write_manifest(m, data::manifest_path_for(out));
}

int cmd_gen(const GenOptions& o, const GlobalOptions& g, std::ostream& out) {
  data::SyntheticConfig cfg = o.synthetic;
  cfg.seed = g.seed;
  const data::Corpus corpus = data::generate_synthetic(cfg);
  data::write_corpus(corpus, o.out);
  data::Manifest m;
  m.name = std::filesystem::path(o.out).stem().string();
  m.source = "synthetic";
  m.label_maps[data::kSpeakerTask] = data::speaker_labels(corpus);
  m.label_maps[data::kContentGroupTask] = data::content_group_labels(corpus);
  data::write_manifest(m, data::manifest_path_for(o.out));
  out << "wrote " << corpus.records.size() << " records (" << corpus.speakers.size()
      << " speakers, " << corpus.layers << " x " << corpus.dim << ") to " << o.out << '\n';
  return kExitOk;
}

int cmd_train(TrainCliOptions o, const GlobalOptions& g, std::ostream& out) {
  const data::Corpus corpus = data::read_corpus(o.in);
  o.model.layers = corpus.layers;
  o.model.dim = corpus.dim;
  o.model.n_speakers = static_cast<std::uint32_t>(corpus.speakers.size());
  o.model.seed = g.seed;
  o.train.seed = g.seed;
  o.train.reduction = o.reduction == "mean" ? model::LossReduction::kMean
                                            : model::LossReduction::kUtterance;
  model::PrivacyTransformer pt(o.model, corpus.speakers);
  const model::TrainReport report = model::train(pt, corpus, o.train);
  model::save(pt, o.out);
  if (!o.report.empty()) {
    const nlohmann::json j = {{"initial_train_loss", report.initial_train_loss},
                              {"initial_val_loss", report.initial_val_loss},
                              {"train_loss", report.train_loss},
                              {"val_loss", report.val_loss},
                              {"best_epoch", report.best_epoch},
                              {"best_val_loss", report.best_val_loss},
                              {"steps", report.steps}};
    write_text(o.report, j.dump(2) + "\n");
  }
  out << "trained " << pt.parameter_count() << " parameters for " << report.train_loss.size()
      << " epochs; best validation loss " << report.best_val_loss << " at epoch "
      << report.best_epoch << "; saved " << o.out << '\n';
  return kExitOk;
}

int cmd_anonymize(const AnonymizeOptions& o, const GlobalOptions& g, std::ostream& out) {
  const data::Corpus corpus = data::read_corpus(o.in);
  data::Corpus result;
  if (!o.checkpoint.empty()) {
    const model::PrivacyTransformer pt = model::load(o.checkpoint);
    result = model::anonymize(pt, corpus, g.seed, o.batch);
  } else {
    result = baselines::laplace_anonymize(corpus, {.epsilon = o.laplace, .seed = g.seed});
  }
  data::write_corpus(result, o.out);
  copy_manifest(o.in, o.out);
  out << "anonymized " << result.records.size() << " records to " << o.out << '\n';
  return kExitOk;
}

int cmd_probe(ProbeOptions o, const GlobalOptions& g, std::ostream& out) {
  CorpusSource source;
  source.path = o.in;
  LoadedCorpus loaded = load_corpus(source);
  TaskConfig task;
  task.name = o.task;
  std::string labels = o.labels;
  if (labels.empty()) {
    if (o.task == kSidTask) {
      labels = "speaker";
    } else if (o.task == data::kContentGroupTask) {
      labels = "content_group";
    } else {
      labels = "manifest";
    }
  }
  task.labels = labels == "speaker"         ? LabelSource::kSpeaker
                : labels == "content_group" ? LabelSource::kContentGroup
                                            : LabelSource::kManifest;
  task.groups = o.groups;
  task.manifest_key = o.task;
  task.split = o.split.empty() ? (task.labels == LabelSource::kSpeaker
                                      ? data::SplitUnit::kSpeakerStratified
                                      : data::SplitUnit::kSpeaker)
                               : parse_split_unit(o.split);
  o.probe.seed = g.seed;
  o.probe.weighting =
      o.weighting == "raw" ? probes::LayerWeighting::kRaw : probes::LayerWeighting::kSoftmax;
  const probes::TaskRun run =
      probes::run_task(loaded.corpus, task_labels(task, loaded), o.probe, task.split, g.seed);
  out << metrics_line(o.task, run.metrics) << '\n';
  if (!o.out.empty()) {
    const nlohmann::json j = {{"task", o.task},
                              {"accuracy", run.metrics.accuracy},
                              {"macro_f1", run.metrics.macro_f1},
                              {"micro_f1", run.metrics.micro_f1},
                              {"classes", run.metrics.classes},
                              {"confusion", run.metrics.confusion},
                              {"best_epoch", run.best_epoch}};
    write_text(o.out, j.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  ExperimentConfig cfg = load_config(o.config);
  if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
  const ExperimentReport report = run_experiment(cfg);
  write_report_files(report, cfg.output_dir);
  out << render_markdown(report);
  out << "\nwrote report.{json,md,csv} to " << cfg.output_dir.string() << '\n';
  bool all_ok = true;
  for (const ArmResult& a : report.arms) all_ok = all_ok && a.ok;
  return all_ok ? kExitOk : kExitRuntime;
}

int cmd_bench(BenchCliOptions o, const GlobalOptions& g, std::ostream& out) {
  const data::Corpus corpus = data::read_corpus(o.in);
  Arm arm;
  arm.seed = g.seed;
  if (!o.checkpoint.empty() || o.paper_model) {
    arm.kind = ArmKind::kPrivacyTransformer;
    arm.name = "privacy_transformer";
    if (!o.checkpoint.empty()) {
      arm.model = std::make_shared<model::PrivacyTransformer>(model::load(o.checkpoint));
    } else {
      model::PrivacyTransformerConfig mc;
      mc.layers = corpus.layers;
      mc.dim = corpus.dim;
      mc.n_speakers = static_cast<std::uint32_t>(corpus.speakers.size());
      mc.seed = g.seed;
      arm.model = std::make_shared<model::PrivacyTransformer>(mc, corpus.speakers);
    }
  } else if (o.laplace > 0.0) {
    arm.kind = ArmKind::kLaplace;
    arm.name = "laplace";
    arm.laplace = {.epsilon = o.laplace, .seed = g.seed};
  } else {
    arm.name = "original";
  }
  o.bench.threads = g.threads;
  const BenchResult r = bench(arm, corpus, o.bench);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "%s: %zu utterances in %.3f s (%.2f ms/utterance, batch %zu, %zu threads), "
                "peak RSS %.1f MB",
                arm.name.c_str(), r.utterances, r.seconds, 1e3 * r.seconds_per_utterance(),
                o.bench.batch, o.bench.threads, static_cast<double>(r.peak_rss_bytes) / 1e6);
  out << buf << '\n';
  return kExitOk;
}

int cmd_report(const ReportOptions& o, std::ostream& out) {
  nlohmann::json j;
  const std::string text = read_text(o.in);
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("report '" + o.in + "' is not valid JSON", e.byte);
  }
  const std::string rendered = render(report_from_json(j), parse_report_format(o.format));
  if (o.out.empty()) {
    out << rendered;
  } else {
    write_text(o.out, rendered);
  }
  return kExitOk;
}

// Routes spdlog output to `err` for the duration of one CLI call.
class ScopedLogger {
 public:
  ScopedLogger(std::ostream& err, const std::string& level)
      : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("embanon", sink);
    logger->set_pattern("[%l] %v");
    logger->set_level(spdlog::level::from_str(level));
    spdlog::set_default_logger(logger);
  }
  ~ScopedLogger() { spdlog::set_default_logger(previous_); }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speech-embedding anonymization: data generation, training, "
               "anonymization, probing and benchmarking."};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for generation, training, noise and probes");
  app.add_option("--threads", g.threads, "Kernel thread cap")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic corpus (.pemb + manifest)");
  gen_cmd->add_option("--speakers", gen.synthetic.n_speakers, "Number of speakers");
  gen_cmd->add_option("--contents", gen.synthetic.n_contents, "Contents per speaker");
  gen_cmd->add_option("--layers", gen.synthetic.layers, "Layers per embedding");
  gen_cmd->add_option("--dim", gen.synthetic.dim, "Embedding width");
  gen_cmd->add_option("--sigma", gen.synthetic.noise_sigma, "Noise standard deviation");
  gen_cmd->add_option("--out", gen.out, "Output .pemb path")->required();

  TrainCliOptions train;
  auto* train_cmd = app.add_subcommand("train", "Fit a Privacy Transformer on a corpus");
  train_cmd->add_option("--in", train.in, "Training corpus (.pemb)")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--report", train.report, "Write the training report as JSON");
  train_cmd->add_option("--epochs", train.train.epochs, "Training epochs");
  train_cmd->add_option("--lr", train.train.lr, "SGD learning rate");
  train_cmd->add_option("--batch", train.train.batch, "Pairs per step")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--val-fraction", train.train.val_fraction,
                        "Fraction of contents held out for validation");
  train_cmd->add_option("--reduction", train.reduction, "Loss reduction")
      ->check(CLI::IsMember({"mean", "utterance"}));
  train_cmd->add_option("--d-spk", train.model.d_spk, "Speaker embedding width");
  train_cmd->add_option("--d-layer", train.model.d_layer, "Layer embedding width");
  train_cmd->add_option("--n-layers", train.model.n_layers, "Encoder depth");
  train_cmd->add_option("--heads", train.model.n_heads, "Attention heads");
  train_cmd->add_option("--d-ff", train.model.d_ff, "Feed-forward width");
  train_cmd->add_option("--dropout", train.model.dropout, "Dropout probability");

  AnonymizeOptions anon;
  auto* anon_cmd = app.add_subcommand("anonymize", "Anonymize a corpus");
  anon_cmd->add_option("--in", anon.in, "Input corpus (.pemb)")->required();
  anon_cmd->add_option("--out", anon.out, "Output corpus (.pemb)")->required();
  auto* ckpt = anon_cmd->add_option("--checkpoint", anon.checkpoint, "Privacy Transformer");
  auto* lap = anon_cmd->add_option("--laplace", anon.laplace, "Laplace mechanism epsilon")
                  ->check(CLI::PositiveNumber);
  ckpt->excludes(lap);
  anon_cmd->add_option("--batch", anon.batch, "Utterances per forward pass")
      ->check(CLI::PositiveNumber);

  ProbeOptions probe;
  auto* probe_cmd = app.add_subcommand("probe", "Train and evaluate one probe task");
  probe_cmd->add_option("--in", probe.in, "Corpus (.pemb)")->required();
  probe_cmd->add_option("--task", probe.task, "Task name (sid, content_group or a manifest key)");
  probe_cmd->add_option("--labels", probe.labels, "Label source")
      ->check(CLI::IsMember({"speaker", "content_group", "manifest"}));
  probe_cmd->add_option("--groups", probe.groups, "Content groups")->check(CLI::PositiveNumber);
  probe_cmd->add_option("--split", probe.split, "Split unit")
      ->check(CLI::IsMember({"utterance", "speaker", "speaker_stratified"}));
  probe_cmd->add_option("--hidden", probe.probe.hidden, "Hidden layer widths");
  probe_cmd->add_option("--lr", probe.probe.lr, "Adam learning rate");
  probe_cmd->add_option("--epochs", probe.probe.epochs, "Maximum epochs");
  probe_cmd->add_option("--patience", probe.probe.patience, "Early-stopping patience");
  probe_cmd->add_option("--batch", probe.probe.batch, "Minibatch size");
  probe_cmd->add_option("--weighting", probe.weighting, "Layer weighting")
      ->check(CLI::IsMember({"softmax", "raw"}));
  probe_cmd->add_option("--out", probe.out, "Write metrics as JSON");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Run a full experiment from a TOML/JSON config");
  eval_cmd->add_option("--config", eval.config, "Experiment config")->required();
  eval_cmd->add_option("--out-dir", eval.out_dir, "Override the config's output directory");

  BenchCliOptions bench_opts;
  auto* bench_cmd = app.add_subcommand("bench", "Time the anonymization pass of one arm");
  bench_cmd->add_option("--in", bench_opts.in, "Corpus (.pemb)")->required();
  auto* b_ckpt = bench_cmd->add_option("--checkpoint", bench_opts.checkpoint,
                                       "Privacy Transformer checkpoint");
  auto* b_lap = bench_cmd->add_option("--laplace", bench_opts.laplace, "Laplace epsilon")
                    ->check(CLI::PositiveNumber);
  auto* b_paper = bench_cmd->add_flag("--paper-model", bench_opts.paper_model,
                                      "Untrained Privacy Transformer at default dimensions");
  b_ckpt->excludes(b_lap)->excludes(b_paper);
  b_lap->excludes(b_paper);
  bench_cmd->add_option("-n", bench_opts.bench.n, "Utterances to anonymize");
  bench_cmd->add_option("--batch", bench_opts.bench.batch, "Utterances per forward pass")
      ->check(CLI::PositiveNumber);

  ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "Re-render a saved report.json");
  report_cmd->add_option("--in", report.in, "report.json")->required();
  report_cmd->add_option("--format", report.format, "markdown, csv or json")
      ->check(CLI::IsMember({"markdown", "md", "csv", "json"}));
  report_cmd->add_option("--out", report.out, "Output path (default: stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return kExitUsage;
  }
  if (anon_cmd->parsed() && anon.checkpoint.empty() && anon.laplace <= 0.0) {
    err << "anonymize: one of --checkpoint or --laplace is required\n" << anon_cmd->help();
    return kExitUsage;
  }

  ScopedLogger logger(err, g.log_level);
  numerics::set_num_threads(g.threads);
  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, g, out);
    if (train_cmd->parsed()) return cmd_train(train, g, out);
    if (anon_cmd->parsed()) return cmd_anonymize(anon, g, out);
    if (probe_cmd->parsed()) return cmd_probe(probe, g, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (bench_cmd->parsed()) return cmd_bench(bench_opts, g, out);
    if (report_cmd->parsed()) return cmd_report(report, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace embanon::harness
