#include "embanon/harness/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "embanon/data/pemb.hpp"
#include "embanon/errors.hpp"
#include "embanon/harness/toml.hpp"

namespace embanon::harness {

using nlohmann::json;

namespace {

// Typed, strict access to one JSON object of the config. Every key that is
// read is marked; finish() rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("", "expected a table");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* raw(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  void get(const char* key, std::string& out) {
    if (const json* v = raw(key)) {
      if (!v->is_string()) fail(key, "expected a string");
      out = v->get<std::string>();
    }
  }
  void get(const char* key, double& out) {
    if (const json* v = raw(key)) {
      if (!v->is_number()) fail(key, "expected a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, bool& out) {
    if (const json* v = raw(key)) {
      if (!v->is_boolean()) fail(key, "expected true or false");
      out = v->get<bool>();
    }
  }
  template <typename T>
    requires std::is_unsigned_v<T>
  void get(const char* key, T& out) {
    if (const json* v = raw(key)) out = to_unsigned<T>(*v, key);
  }
  template <typename T>
  void get_list(const char* key, std::vector<T>& out) {
    if (const json* v = raw(key)) {
      if (!v->is_array()) fail(key, "expected an array");
      out.clear();
      for (const json& e : *v) out.push_back(to_unsigned<T>(e, key));
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(key, "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::string path = where_;
    if (!key.empty()) path += (path.empty() ? "" : ".") + key;
    throw ConfigError("config " + (path.empty() ? std::string("root") : path) + ": " + what);
  }

 private:
  template <typename T>
  T to_unsigned(const json& v, const char* key) const {
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) {
      fail(key, "expected a non-negative integer");
    }
    const auto u = v.get<unsigned long long>();
    if (u > std::numeric_limits<T>::max()) fail(key, "value out of range");
    return static_cast<T>(u);
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.empty() || path.is_absolute() || base.empty()) return path;
  return base / path;
}

std::string reduction_name(model::LossReduction r) {
  return r == model::LossReduction::kMean ? "mean" : "utterance";
}

model::LossReduction parse_reduction(const std::string& s) {
  if (s == "mean") return model::LossReduction::kMean;
  if (s == "utterance") return model::LossReduction::kUtterance;
  throw ConfigError("unknown loss reduction '" + s + "' (expected mean or utterance)");
}

std::string weighting_name(probes::LayerWeighting w) {
  return w == probes::LayerWeighting::kSoftmax ? "softmax" : "raw";
}

probes::LayerWeighting parse_weighting(const std::string& s) {
  if (s == "softmax") return probes::LayerWeighting::kSoftmax;
  if (s == "raw") return probes::LayerWeighting::kRaw;
  throw ConfigError("unknown layer weighting '" + s + "' (expected softmax or raw)");
}

std::string label_source_name(LabelSource s) {
  switch (s) {
    case LabelSource::kSpeaker: return "speaker";
    case LabelSource::kContentGroup: return "content_group";
    case LabelSource::kManifest: return "manifest";
  }
  return "";
}

LabelSource parse_label_source(const std::string& s) {
  if (s == "speaker") return LabelSource::kSpeaker;
  if (s == "content_group") return LabelSource::kContentGroup;
  if (s == "manifest") return LabelSource::kManifest;
  throw ConfigError("unknown label source '" + s +
                    "' (expected speaker, content_group or manifest)");
}

data::SyntheticConfig synthetic_from_json(const json& j) {
  data::SyntheticConfig s;
  Fields f(j, "corpus.synthetic");
  f.get("n_speakers", s.n_speakers);
  f.get("n_contents", s.n_contents);
  f.get("layers", s.layers);
  f.get("dim", s.dim);
  f.get("speaker_latent", s.speaker_latent);
  f.get("content_latent", s.content_latent);
  f.get("noise_sigma", s.noise_sigma);
  f.get("seed", s.seed);
  f.get("speaker_id_base", s.speaker_id_base);
  f.finish();
  s.validate();
  return s;
}

json synthetic_to_json(const data::SyntheticConfig& s) {
  return {{"n_speakers", s.n_speakers},         {"n_contents", s.n_contents},
          {"layers", s.layers},                 {"dim", s.dim},
          {"speaker_latent", s.speaker_latent}, {"content_latent", s.content_latent},
          {"noise_sigma", s.noise_sigma},       {"seed", s.seed},
          {"speaker_id_base", s.speaker_id_base}};
}

ArmConfig arm_from_json(const json& j, std::size_t index,
                        const std::filesystem::path& base) {
  ArmConfig a;
  Fields f(j, "arms[" + std::to_string(index) + "]");
  std::string kind;
  f.get("kind", kind);
  if (kind.empty()) f.fail("kind", "missing");
  a.kind = parse_arm_kind(kind);
  a.name = kind;
  f.get("name", a.name);
  switch (a.kind) {
    case ArmKind::kOriginal:
      break;
    case ArmKind::kLaplace:
      if (!f.has("epsilon")) f.fail("epsilon", "missing");
      f.get("epsilon", a.laplace.epsilon);
      f.get("clip_lo", a.laplace.clip_lo);
      f.get("clip_hi", a.laplace.clip_hi);
      a.laplace_seed_set = f.has("seed");
      f.get("seed", a.laplace.seed);
      a.laplace.validate();
      break;
    case ArmKind::kPrivacyTransformer: {
      std::string checkpoint;
      f.get("checkpoint", checkpoint);
      a.checkpoint = resolve(base, checkpoint);
      if (const json* m = f.raw("model")) {
        Fields mf(*m, "arms[" + std::to_string(index) + "].model");
        mf.get("d_spk", a.model.d_spk);
        mf.get("d_layer", a.model.d_layer);
        mf.get("n_layers", a.model.n_layers);
        mf.get("n_heads", a.model.n_heads);
        mf.get("d_ff", a.model.d_ff);
        mf.get("dropout", a.model.dropout);
        mf.get("seed", a.model.seed);
        mf.finish();
      }
      if (const json* t = f.raw("train")) {
        Fields tf(*t, "arms[" + std::to_string(index) + "].train");
        tf.get("epochs", a.train.epochs);
        tf.get("lr", a.train.lr);
        tf.get("batch", a.train.batch);
        tf.get("val_fraction", a.train.val_fraction);
        tf.get("pairs_per_epoch", a.train.pairs_per_epoch);
        tf.get("val_pairs", a.train.val_pairs);
        std::string reduction = reduction_name(a.train.reduction);
        tf.get("reduction", reduction);
        a.train.reduction = parse_reduction(reduction);
        tf.get("seed", a.train.seed);
        tf.finish();
      }
      break;
    }
  }
  f.finish();
  return a;
}

json arm_to_json(const ArmConfig& a) {
  json j = {{"name", a.name}, {"kind", arm_kind_name(a.kind)}};
  if (a.kind == ArmKind::kLaplace) {
    j["epsilon"] = a.laplace.epsilon;
    j["clip_lo"] = a.laplace.clip_lo;
    j["clip_hi"] = a.laplace.clip_hi;
    if (a.laplace_seed_set) j["seed"] = a.laplace.seed;
  } else if (a.kind == ArmKind::kPrivacyTransformer) {
    if (!a.checkpoint.empty()) j["checkpoint"] = a.checkpoint.string();
    j["model"] = {{"d_spk", a.model.d_spk},     {"d_layer", a.model.d_layer},
                  {"n_layers", a.model.n_layers}, {"n_heads", a.model.n_heads},
                  {"d_ff", a.model.d_ff},       {"dropout", a.model.dropout},
                  {"seed", a.model.seed}};
    j["train"] = {{"epochs", a.train.epochs},
                  {"lr", a.train.lr},
                  {"batch", a.train.batch},
                  {"val_fraction", a.train.val_fraction},
                  {"pairs_per_epoch", a.train.pairs_per_epoch},
                  {"val_pairs", a.train.val_pairs},
                  {"reduction", reduction_name(a.train.reduction)},
                  {"seed", a.train.seed}};
  }
  return j;
}

TaskConfig task_from_json(const json& j, std::size_t index) {
  TaskConfig t;
  Fields f(j, "tasks[" + std::to_string(index) + "]");
  f.get("name", t.name);
  if (t.name.empty()) f.fail("name", "missing");
  std::string labels = t.name == kSidTask ? "speaker" : "";
  f.get("labels", labels);
  if (labels.empty()) f.fail("labels", "missing");
  t.labels = parse_label_source(labels);
  f.get("groups", t.groups);
  if (t.groups == 0) f.fail("groups", "must be positive");
  t.manifest_key = t.name;
  f.get("key", t.manifest_key);
  // Identity tasks split within speakers; other tasks default to unseen
  // speakers at test time.
  std::string split = t.labels == LabelSource::kSpeaker ? "speaker_stratified" : "speaker";
  f.get("split", split);
  t.split = parse_split_unit(split);
  f.finish();
  return t;
}

json task_to_json(const TaskConfig& t) {
  json j = {{"name", t.name},
            {"labels", label_source_name(t.labels)},
            {"split", split_unit_name(t.split)}};
  if (t.labels == LabelSource::kContentGroup) j["groups"] = t.groups;
  if (t.labels == LabelSource::kManifest) j["key"] = t.manifest_key;
  return j;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string arm_kind_name(ArmKind kind) {
  switch (kind) {
    case ArmKind::kOriginal: return "original";
    case ArmKind::kLaplace: return "laplace";
    case ArmKind::kPrivacyTransformer: return "privacy_transformer";
  }
  return "";
}

ArmKind parse_arm_kind(const std::string& name) {
  if (name == "original") return ArmKind::kOriginal;
  if (name == "laplace") return ArmKind::kLaplace;
  if (name == "privacy_transformer") return ArmKind::kPrivacyTransformer;
  throw ConfigError("unknown arm kind '" + name +
                    "' (expected original, laplace or privacy_transformer)");
}

std::string split_unit_name(data::SplitUnit unit) {
  switch (unit) {
    case data::SplitUnit::kUtterance: return "utterance";
    case data::SplitUnit::kSpeaker: return "speaker";
    case data::SplitUnit::kSpeakerStratified: return "speaker_stratified";
  }
  return "";
}

data::SplitUnit parse_split_unit(const std::string& name) {
  if (name == "utterance") return data::SplitUnit::kUtterance;
  if (name == "speaker") return data::SplitUnit::kSpeaker;
  if (name == "speaker_stratified") return data::SplitUnit::kSpeakerStratified;
  throw ConfigError("unknown split unit '" + name +
                    "' (expected utterance, speaker or speaker_stratified)");
}

void ExperimentConfig::validate() const {
  if (corpus.path.empty() == !corpus.synthetic.has_value()) {
    throw ConfigError("config corpus: set exactly one of path or synthetic");
  }
  if (arms.empty()) throw ConfigError("config: at least one arm is required");
  if (tasks.empty()) throw ConfigError("config: at least one task is required");
  std::set<std::string> names;
  for (const ArmConfig& a : arms) {
    if (a.name.empty()) throw ConfigError("config: arm with an empty name");
    if (!names.insert(a.name).second) throw ConfigError("config: duplicate arm '" + a.name + "'");
    if (a.kind == ArmKind::kLaplace) a.laplace.validate();
  }
  names.clear();
  bool has_sid = false;
  for (const TaskConfig& t : tasks) {
    if (!names.insert(t.name).second) throw ConfigError("config: duplicate task '" + t.name + "'");
    if (t.name == kSidTask) {
      if (t.labels != LabelSource::kSpeaker) {
        throw ConfigError("config: task 'sid' must use speaker labels");
      }
      has_sid = true;
    }
  }
  if (!has_sid) throw ConfigError("config: the speaker identification task 'sid' is required");
  probe.validate();
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  Fields root(j, "");
  if (const json* c = root.raw("corpus")) {
    Fields cf(*c, "corpus");
    std::string path;
    cf.get("path", path);
    cfg.corpus.path = resolve(base_dir, path);
    if (const json* s = cf.raw("synthetic")) cfg.corpus.synthetic = synthetic_from_json(*s);
    cf.finish();
  } else {
    cfg.corpus.synthetic = data::SyntheticConfig{};
  }
  if (const json* s = root.raw("seeds")) {
    Fields sf(*s, "seeds");
    sf.get("split", cfg.seeds.split);
    sf.get("probe", cfg.seeds.probe);
    sf.get("anonymize", cfg.seeds.anonymize);
    sf.finish();
  }
  if (const json* p = root.raw("probe")) {
    Fields pf(*p, "probe");
    pf.get_list("hidden", cfg.probe.hidden);
    pf.get("lr", cfg.probe.lr);
    pf.get("epochs", cfg.probe.epochs);
    pf.get("patience", cfg.probe.patience);
    pf.get("batch", cfg.probe.batch);
    std::string weighting = weighting_name(cfg.probe.weighting);
    pf.get("weighting", weighting);
    cfg.probe.weighting = parse_weighting(weighting);
    pf.finish();
  }
  cfg.probe.seed = cfg.seeds.probe;
  if (const json* arms = root.raw("arms")) {
    if (!arms->is_array()) root.fail("arms", "expected an array of tables");
    for (std::size_t i = 0; i < arms->size(); ++i) {
      cfg.arms.push_back(arm_from_json((*arms)[i], i, base_dir));
    }
  }
  if (const json* tasks = root.raw("tasks")) {
    if (!tasks->is_array()) root.fail("tasks", "expected an array of tables");
    for (std::size_t i = 0; i < tasks->size(); ++i) {
      cfg.tasks.push_back(task_from_json((*tasks)[i], i));
    }
  }
  std::string out = "report";
  root.get("output_dir", out);
  cfg.output_dir = resolve(base_dir, out);
  root.finish();
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json corpus = json::object();
  if (!cfg.corpus.path.empty()) corpus["path"] = cfg.corpus.path.string();
  if (cfg.corpus.synthetic) corpus["synthetic"] = synthetic_to_json(*cfg.corpus.synthetic);
  json arms = json::array();
  for (const ArmConfig& a : cfg.arms) arms.push_back(arm_to_json(a));
  json tasks = json::array();
  for (const TaskConfig& t : cfg.tasks) tasks.push_back(task_to_json(t));
  return {{"corpus", std::move(corpus)},
          {"seeds",
           {{"split", cfg.seeds.split},
            {"probe", cfg.seeds.probe},
            {"anonymize", cfg.seeds.anonymize}}},
          {"probe",
           {{"hidden", cfg.probe.hidden},
            {"lr", cfg.probe.lr},
            {"epochs", cfg.probe.epochs},
            {"patience", cfg.probe.patience},
            {"batch", cfg.probe.batch},
            {"weighting", weighting_name(cfg.probe.weighting)}}},
          {"arms", std::move(arms)},
          {"tasks", std::move(tasks)},
          {"output_dir", cfg.output_dir.string()}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  json j;
  if (path.extension() == ".json") {
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("config '" + path.string() + "': " + e.what());
    }
  } else {
    try {
      j = parse_toml(text);
    } catch (const ConfigError& e) {
      throw ConfigError("config '" + path.string() + "': " + e.what());
    }
  }
  return config_from_json(j, path.parent_path());
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : config_to_json(cfg).dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

data::Corpus Arm::apply(const data::Corpus& corpus, std::size_t batch) const {
  switch (kind) {
    case ArmKind::kOriginal:
      return corpus;
    case ArmKind::kLaplace:
      return baselines::laplace_anonymize(corpus, laplace);
    case ArmKind::kPrivacyTransformer:
      if (!model) throw ContractError("privacy transformer arm '" + name + "' has no model");
      return model::anonymize(*model, corpus, seed, batch);
  }
  throw ContractError("unknown arm kind");
}

Arm prepare_arm(const ArmConfig& cfg, const data::Corpus& corpus, const Seeds& seeds) {
  Arm arm;
  arm.name = cfg.name;
  arm.kind = cfg.kind;
  arm.seed = seeds.anonymize;
  arm.laplace = cfg.laplace;
  if (cfg.kind == ArmKind::kLaplace && !cfg.laplace_seed_set) {
    arm.laplace.seed = seeds.anonymize;
  }
  if (cfg.kind != ArmKind::kPrivacyTransformer) return arm;

  if (!cfg.checkpoint.empty()) {
    auto m = std::make_shared<model::PrivacyTransformer>(model::load(cfg.checkpoint));
    if (m->config().layers != corpus.layers || m->config().dim != corpus.dim) {
      throw DimensionError("checkpoint '" + cfg.checkpoint.string() + "' expects " +
                           std::to_string(m->config().layers) + " x " +
                           std::to_string(m->config().dim) + " embeddings, corpus has " +
                           std::to_string(corpus.layers) + " x " +
                           std::to_string(corpus.dim));
    }
    arm.model = std::move(m);
    return arm;
  }
  model::PrivacyTransformerConfig mc = cfg.model;
  mc.layers = corpus.layers;
  mc.dim = corpus.dim;
  mc.n_speakers = static_cast<std::uint32_t>(corpus.speakers.size());
  auto m = std::make_shared<model::PrivacyTransformer>(mc, corpus.speakers);
  model::train(*m, corpus, cfg.train);
  arm.model = std::move(m);
  return arm;
}

LoadedCorpus load_corpus(const CorpusSource& source) {
  const auto t0 = std::chrono::steady_clock::now();
  LoadedCorpus out;
  if (source.synthetic) {
    out.corpus = data::generate_synthetic(*source.synthetic);
    out.manifest.name = "synthetic";
    out.manifest.source = "generated";
  } else {
    out.corpus = data::read_corpus(source.path);
    const auto manifest = data::manifest_path_for(source.path);
    if (std::filesystem::exists(manifest)) out.manifest = data::read_manifest(manifest);
  }
  out.seconds = seconds_since(t0);
  return out;
}

data::LabelMap task_labels(const TaskConfig& task, const LoadedCorpus& loaded) {
  switch (task.labels) {
    case LabelSource::kSpeaker:
      return data::speaker_labels(loaded.corpus);
    case LabelSource::kContentGroup:
      return data::content_group_labels(loaded.corpus, task.groups);
    case LabelSource::kManifest: {
      const auto it = loaded.manifest.label_maps.find(task.manifest_key);
      if (it == loaded.manifest.label_maps.end()) {
        throw ConfigError("task '" + task.name + "': the corpus manifest has no label map '" +
                          task.manifest_key + "'");
      }
      return it->second;
    }
  }
  throw ContractError("unknown label source");
}

}  // namespace embanon::harness
