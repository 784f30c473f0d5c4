#include "survxai/pipeline/config.hpp"

#include <nlohmann/json.hpp>
#include <set>

#include "survxai/error.hpp"
#include "survxai/util/format.hpp"

namespace survxai::pipeline {
namespace {

using nlohmann::json;

constexpr std::array<const char*, 9> kStageNames = {"gen",     "phase1",    "train-unsup", "train-clf", "explain",
                                                     "globalize", "optimize", "evaluate",    "report"};

// A JSON object whose keys must all be consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError("config: " + path_ + " must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ValidationError("config: " + where(key) + " has the wrong type");
    }
  }

  void get_path(const std::string& key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  template <class E, class Parse>
  void get_enum(const std::string& key, E& out, Parse parse) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_string()) throw ValidationError("config: " + where(key) + " must be a string");
    out = parse(it->get<std::string>());
  }

  // Calls fn(Section&) when the key is present.
  template <class Fn>
  void section(const std::string& key, Fn fn) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    Section s(*it, where(key));
    fn(s);
    s.finish();
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ValidationError("config: unknown key " + where(item.key()));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_train(Section& s, models::TrainConfig& t) {
  s.get("learning_rate", t.learning_rate);
  s.get("max_epochs", t.max_epochs);
  s.get("patience", t.patience);
  s.get_enum("schedule", t.schedule, models::parse_schedule);
  s.get_enum("strategy", t.strategy, models::parse_strategy);
  s.get("augment", t.augment);
  s.get("folds", t.folds);
  s.get("batch_size", t.batch_size);
  s.section("adam", [&](Section& a) {
    a.get("beta1", t.adam.beta1);
    a.get("beta2", t.adam.beta2);
    a.get("epsilon", t.adam.epsilon);
  });
  s.section("augmentation", [&](Section& a) {
    a.get("max_rotation_deg", t.augmentation.max_rotation_deg);
    a.get("max_shift_voxels", t.augmentation.max_shift_voxels);
    a.get("max_intensity_change", t.augmentation.max_intensity_change);
  });
}

json write_train(const models::TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"max_epochs", t.max_epochs},
          {"patience", t.patience},
          {"schedule", models::to_string(t.schedule)},
          {"strategy", models::to_string(t.strategy)},
          {"augment", t.augment},
          {"folds", t.folds},
          {"batch_size", t.batch_size},
          {"adam", {{"beta1", t.adam.beta1}, {"beta2", t.adam.beta2}, {"epsilon", t.adam.epsilon}}},
          {"augmentation",
           {{"max_rotation_deg", t.augmentation.max_rotation_deg},
            {"max_shift_voxels", t.augmentation.max_shift_voxels},
            {"max_intensity_change", t.augmentation.max_intensity_change}}}};
}

globalopt::LossWeights read_weights(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("config: " + where + " must be [l1, l2, l3]");
  globalopt::LossWeights w;
  try {
    w.l1 = j[0].get<double>();
    w.l2 = j[1].get<double>();
    w.l3 = j[2].get<double>();
  } catch (const json::exception&) {
    throw ValidationError("config: " + where + " must hold numbers");
  }
  return w;
}

json write_weights(const globalopt::LossWeights& w) { return json::array({w.l1, w.l2, w.l3}); }

}  // namespace

std::string to_string(StageId s) { return kStageNames[static_cast<std::size_t>(s)]; }

StageId parse_stage_id(const std::string& s) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (s == kStageNames[i]) return kAllStages[i];
  }
  throw ValidationError("unknown stage '" + s + "'");
}

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  c.autoencoder_training.learning_rate = 1e-3;
  c.autoencoder_training.max_epochs = 8;
  c.autoencoder_training.patience = 3;
  c.autoencoder_training.folds = 1;
  c.autoencoder_training.batch_size = 4;
  c.classifier_training.learning_rate = 1e-3;
  c.classifier_training.max_epochs = 40;
  c.classifier_training.patience = 8;
  c.classifier_training.folds = 5;
  c.classifier_training.batch_size = 4;
  c.classifier_training.strategy = models::Strategy::unfreeze;
  c.optimizer.learning_rate = 1e-3;
  return c;
}

std::filesystem::path PipelineConfig::manifest_path() const {
  return manifest.empty() ? out_dir / "cohort" / "manifest.csv" : manifest;
}

std::filesystem::path PipelineConfig::atlas_path() const { return atlas.empty() ? out_dir / "cohort" / "atlas.xvol" : atlas; }

std::filesystem::path PipelineConfig::stage_dir(StageId s) const {
  switch (s) {
    case StageId::gen: return out_dir / "cohort";
    case StageId::train_unsup: return out_dir / "unsupervised";
    case StageId::train_clf: return out_dir / "classifier";
    default: return out_dir / to_string(s);
  }
}

SyntheticSpec PipelineConfig::synthetic_effective() const {
  SyntheticSpec s = synthetic;
  s.seed = seed;
  return s;
}

models::TrainConfig PipelineConfig::autoencoder_effective() const {
  models::TrainConfig t = autoencoder_training;
  t.seed = seed + kSeedOffsetAutoencoder;
  return t;
}

models::TrainConfig PipelineConfig::classifier_effective() const {
  models::TrainConfig t = classifier_training;
  t.seed = seed + kSeedOffsetClassifier;
  return t;
}

attribution::MethodOptions PipelineConfig::explain_effective() const {
  attribution::MethodOptions o = explain.options;
  o.gradient_shap.seed = seed + kSeedOffsetExplain;
  o.kernel_shap.seed = seed + kSeedOffsetExplain + 1;
  return o;
}

quality::FaithfulnessConfig PipelineConfig::faithfulness_effective() const {
  quality::FaithfulnessConfig f = faithfulness;
  f.seed = seed + kSeedOffsetFaithfulness;
  return f;
}

globalopt::OptConfig PipelineConfig::optimizer_effective() const {
  globalopt::OptConfig o = optimizer;
  o.seed = seed + kSeedOffsetOptimizer;
  o.evaluation = faithfulness_effective();
  return o;
}

void PipelineConfig::validate() const {
  if (out_dir.empty()) throw ValidationError("config: out_dir must be set");
  for (const auto* p : {&manifest, &atlas}) {
    if (!p->empty() && !std::filesystem::exists(*p)) throw ValidationError("config: path does not exist: " + p->string());
  }
  synthetic.validate();
  if (!(phase1.variance_threshold > 0.0 && phase1.variance_threshold <= 1.0)) {
    throw ValidationError("config: phase1.variance_threshold must be in (0, 1]");
  }
  if (phase1.max_components < 1) throw ValidationError("config: phase1.max_components must be >= 1");
  autoencoder.validate();
  classifier.validate();
  autoencoder_training.validate();
  classifier_training.validate();
  if (explain.methods.empty()) throw ValidationError("config: explain.methods is empty");
  if (explain.target > 1) throw ValidationError("config: explain.target must be 0 or 1");
  if (explain.group != "longer" && explain.group != "shorter" && explain.group != "all") {
    throw ValidationError("config: explain.group must be longer, shorter or all");
  }
  if (explain.options.ig_steps < 2) throw ValidationError("config: explain.ig_steps must be >= 2");
  if (explain.options.kernel_shap.group_size < 1 || explain.options.kernel_shap.coalitions < 2) {
    throw ValidationError("config: explain.kernel_shap needs group_size >= 1 and coalitions >= 2");
  }
  if (explain.n_components < 1) throw ValidationError("config: explain.n_components must be >= 1");
  faithfulness.validate();
  optimizer.validate();
  for (const auto& w : grid.weights) w.validate();
  for (double lr : grid.learning_rates) {
    if (!(lr > 0.0)) throw ValidationError("config: grid learning rates must be positive");
  }
}

PipelineConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  PipelineConfig c = PipelineConfig::defaults();
  Section root(doc, "");
  root.get("seed", c.seed);
  root.get_path("out_dir", c.out_dir);
  root.section("paths", [&](Section& s) {
    s.get_path("manifest", c.manifest);
    s.get_path("atlas", c.atlas);
  });
  root.section("stages", [&](Section& s) {
    for (std::size_t i = 0; i < kAllStages.size(); ++i) {
      bool on = c.enabled[i];
      s.get(kStageNames[i], on);
      c.enabled[i] = on;
    }
  });
  root.section("synthetic", [&](Section& s) {
    s.get("n_per_group", c.synthetic.n_per_group);
    s.get("dims", c.synthetic.dims);
    s.get("lesion_radius", c.synthetic.lesion_radius);
    s.get("rim_factor", c.synthetic.rim_factor);
    s.get("rim_width", c.synthetic.rim_width);
    s.get("signal_strength", c.synthetic.signal_strength);
    s.get("noise_std", c.synthetic.noise_std);
  });
  root.section("phase1", [&](Section& s) {
    s.get("variance_threshold", c.phase1.variance_threshold);
    s.get("max_components", c.phase1.max_components);
  });
  root.section("autoencoder", [&](Section& s) {
    s.get("input_dims", c.autoencoder.input_dims);
    s.get("widths", c.autoencoder.widths);
    s.get("kernel", c.autoencoder.kernel);
    s.section("training", [&](Section& t) { read_train(t, c.autoencoder_training); });
  });
  root.section("classifier", [&](Section& s) {
    s.get_enum("head", c.classifier.head, models::parse_head);
    s.get("hidden", c.classifier.hidden);
    s.section("training", [&](Section& t) { read_train(t, c.classifier_training); });
  });
  root.section("explain", [&](Section& s) {
    if (const json* m = s.raw("methods")) {
      if (!m->is_array()) throw ValidationError("config: explain.methods must be an array");
      c.explain.methods.clear();
      for (const auto& v : *m) {
        if (!v.is_string()) throw ValidationError("config: explain.methods must hold strings");
        c.explain.methods.push_back(attribution::parse_method(v.get<std::string>()));
      }
    }
    s.get("target", c.explain.target);
    s.get("group", c.explain.group);
    s.get("ig_steps", c.explain.options.ig_steps);
    s.get("gradcam_layer", c.explain.options.gradcam_layer);
    s.get("n_components", c.explain.n_components);
    s.section("gradient_shap", [&](Section& g) {
      g.get("samples", c.explain.options.gradient_shap.samples);
      g.get("noise_std", c.explain.options.gradient_shap.noise_std);
    });
    s.section("kernel_shap", [&](Section& k) {
      k.get("coalitions", c.explain.options.kernel_shap.coalitions);
      k.get("group_size", c.explain.options.kernel_shap.group_size);
    });
  });
  root.section("faithfulness", [&](Section& s) {
    s.get("n_perturbations", c.faithfulness.n_perturbations);
    s.get("subset_fraction", c.faithfulness.subset_fraction);
  });
  root.section("optimizer", [&](Section& s) {
    globalopt::OptConfig& o = c.optimizer;
    if (const json* w = s.raw("weights")) o.loss.weights = read_weights(*w, "optimizer.weights");
    s.get_enum("similarity", o.loss.similarity, globalopt::parse_similarity);
    s.get_enum("sparseness", o.loss.sparseness, globalopt::parse_sparseness);
    s.get("faith_floor", o.loss.faith_floor);
    s.get("learning_rate", o.learning_rate);
    s.get("max_epochs", o.max_epochs);
    s.get("patience", o.patience);
    s.get("patience_start", o.patience_start);
    s.get("steps_per_epoch", o.steps_per_epoch);
    s.get("subsets_per_epoch", o.subsets_per_epoch);
    s.get("probe_pool", o.probe_pool);
    s.get("train_pool", o.train_pool);
    s.get("widths", o.widths);
    s.section("grid", [&](Section& g) {
      g.get("enabled", c.grid.enabled);
      g.get("learning_rates", c.grid.learning_rates);
      if (const json* ws = g.raw("weights")) {
        if (!ws->is_array()) throw ValidationError("config: optimizer.grid.weights must be an array");
        c.grid.weights.clear();
        for (const auto& w : *ws) c.grid.weights.push_back(read_weights(w, "optimizer.grid.weights"));
      }
    });
  });
  root.finish();
  c.classifier.encoder = c.autoencoder;
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("config file not found: " + path.string());
  return parse_config(util::read_text(path));
}

std::string to_json(const PipelineConfig& c) {
  json stages = json::object();
  for (std::size_t i = 0; i < kAllStages.size(); ++i) stages[kStageNames[i]] = c.enabled[i];
  json methods = json::array();
  for (auto m : c.explain.methods) methods.push_back(attribution::to_string(m));
  json grid_weights = json::array();
  for (const auto& w : c.grid.weights) grid_weights.push_back(write_weights(w));
  const globalopt::OptConfig& o = c.optimizer;
  json doc = {
      {"seed", c.seed},
      {"out_dir", c.out_dir.generic_string()},
      {"paths", {{"manifest", c.manifest.generic_string()}, {"atlas", c.atlas.generic_string()}}},
      {"stages", stages},
      {"synthetic",
       {{"n_per_group", c.synthetic.n_per_group},
        {"dims", c.synthetic.dims},
        {"lesion_radius", c.synthetic.lesion_radius},
        {"rim_factor", c.synthetic.rim_factor},
        {"rim_width", c.synthetic.rim_width},
        {"signal_strength", c.synthetic.signal_strength},
        {"noise_std", c.synthetic.noise_std}}},
      {"phase1", {{"variance_threshold", c.phase1.variance_threshold}, {"max_components", c.phase1.max_components}}},
      {"autoencoder",
       {{"input_dims", c.autoencoder.input_dims},
        {"widths", c.autoencoder.widths},
        {"kernel", c.autoencoder.kernel},
        {"training", write_train(c.autoencoder_training)}}},
      {"classifier",
       {{"head", models::to_string(c.classifier.head)},
        {"hidden", c.classifier.hidden},
        {"training", write_train(c.classifier_training)}}},
      {"explain",
       {{"methods", methods},
        {"target", c.explain.target},
        {"group", c.explain.group},
        {"ig_steps", c.explain.options.ig_steps},
        {"gradcam_layer", c.explain.options.gradcam_layer},
        {"n_components", c.explain.n_components},
        {"gradient_shap",
         {{"samples", c.explain.options.gradient_shap.samples},
          {"noise_std", c.explain.options.gradient_shap.noise_std}}},
        {"kernel_shap",
         {{"coalitions", c.explain.options.kernel_shap.coalitions},
          {"group_size", c.explain.options.kernel_shap.group_size}}}}},
      {"faithfulness",
       {{"n_perturbations", c.faithfulness.n_perturbations}, {"subset_fraction", c.faithfulness.subset_fraction}}},
      {"optimizer",
       {{"weights", write_weights(o.loss.weights)},
        {"similarity", globalopt::to_string(o.loss.similarity)},
        {"sparseness", globalopt::to_string(o.loss.sparseness)},
        {"faith_floor", o.loss.faith_floor},
        {"learning_rate", o.learning_rate},
        {"max_epochs", o.max_epochs},
        {"patience", o.patience},
        {"patience_start", o.patience_start},
        {"steps_per_epoch", o.steps_per_epoch},
        {"subsets_per_epoch", o.subsets_per_epoch},
        {"probe_pool", o.probe_pool},
        {"train_pool", o.train_pool},
        {"widths", o.widths},
        {"grid", {{"enabled", c.grid.enabled}, {"learning_rates", c.grid.learning_rates}, {"weights", grid_weights}}}}}};
  return doc.dump(2) + "\n";
}

}  // namespace survxai::pipeline
