#include "survxai/models/train.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "survxai/error.hpp"
#include "survxai/quality/quality.hpp"

namespace survxai::models {
namespace {

struct FoldHooks {
  // One optimizer step on a batch; returns the batch-mean loss.
  std::function<double(const std::vector<std::size_t>&, std::mt19937_64&, double)> step;
  std::function<double(const std::vector<std::size_t>&)> evaluate;
  std::function<std::vector<float>()> snapshot;
  std::function<void(const std::vector<float>&)> restore;
};

FoldRun run_fold(const FoldHooks& hooks, std::vector<std::size_t> train, const std::vector<std::size_t>& val,
                 const TrainConfig& cfg, std::mt19937_64& rng) {
  FoldRun run;
  double best = std::numeric_limits<double>::infinity();
  std::vector<float> best_params = hooks.snapshot();
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    const double lr = cfg.learning_rate_at(epoch);
    double total = 0.0;
    for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> batch(train.begin() + static_cast<std::ptrdiff_t>(start),
                                           train.begin() + static_cast<std::ptrdiff_t>(std::min(train.size(), start + cfg.batch_size)));
      total += hooks.step(batch, rng, lr) * static_cast<double>(batch.size());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(train.size());
    rec.val_loss = hooks.evaluate(val);
    rec.learning_rate = lr;
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
      throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " (train " +
                            std::to_string(rec.train_loss) + ", validation " + std::to_string(rec.val_loss) + ")");
    }
    bool stop = false;
    if (rec.val_loss < best) {
      best = rec.val_loss;
      best_params = hooks.snapshot();
      run.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      stop = true;
    }
    rec.best_val_loss = best;
    run.trace.push_back(rec);
    if (stop) {
      run.early_stopped = true;
      break;
    }
  }
  hooks.restore(best_params);
  return run;
}

Tensor batch_tensor(const std::vector<const io::Volume*>& vols, const std::vector<std::size_t>& idx,
                    const TrainConfig& cfg, std::mt19937_64* rng) {
  std::vector<Tensor> samples;
  samples.reserve(idx.size());
  for (std::size_t i : idx) {
    if (rng != nullptr && cfg.augment) {
      samples.push_back(io::augment(*vols[i], (*rng)(), cfg.augmentation).as_sample());
    } else {
      samples.push_back(vols[i]->as_sample());
    }
  }
  std::vector<const Tensor*> ptrs;
  for (const Tensor& t : samples) ptrs.push_back(&t);
  return tensor::stack(ptrs);
}

void check_grid(const io::Volume& v, const AutoencoderSpec& spec) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (v.header.dims[a] != spec.input_dims[a]) {
      throw ShapeError("volume dims do not match the network input dims");
    }
  }
}

struct Split {
  std::vector<std::size_t> train, val;
  std::string name;
};

std::vector<Split> make_splits(const std::vector<std::size_t>& fold_of, std::size_t folds) {
  std::vector<Split> out;
  if (folds <= 1) {
    Split s;
    s.name = "all";
    s.train.resize(fold_of.size());
    std::iota(s.train.begin(), s.train.end(), 0);
    s.val = s.train;
    out.push_back(std::move(s));
    return out;
  }
  for (std::size_t f = 0; f < folds; ++f) {
    Split s;
    s.name = std::to_string(f);
    for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? s.val : s.train).push_back(i);
    if (s.val.empty() || s.train.empty()) throw ValidationError("fold " + s.name + " is empty; use fewer folds");
    out.push_back(std::move(s));
  }
  return out;
}

std::size_t best_fold(const std::vector<FoldMetrics>& folds) {
  std::size_t best = 0;
  for (std::size_t f = 1; f < folds.size(); ++f) {
    if (folds[f].val_loss < folds[best].val_loss) best = f;
  }
  return best;
}

void copy_params(ParamStore& dst, const ParamStore& src) {
  if (dst.size() != src.size()) throw ShapeError("pretrained encoder does not match the classifier encoder");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].value.shape() != src[i].value.shape()) {
      throw ShapeError("pretrained encoder parameter " + src[i].name + " has shape " +
                       tensor::shape_string(src[i].value.shape()));
    }
  }
  dst = src;
}

}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::freeze: return "freeze";
    case Strategy::unfreeze: return "unfreeze";
    case Strategy::full: return "full";
  }
  return "?";
}

std::string to_string(Schedule s) { return s == Schedule::constant ? "constant" : "step"; }

Strategy parse_strategy(const std::string& s) {
  if (s == "freeze") return Strategy::freeze;
  if (s == "unfreeze") return Strategy::unfreeze;
  if (s == "full") return Strategy::full;
  throw ValidationError("unknown strategy '" + s + "' (expected freeze, unfreeze or full)");
}

Schedule parse_schedule(const std::string& s) {
  if (s == "constant") return Schedule::constant;
  if (s == "step") return Schedule::step;
  throw ValidationError("unknown schedule '" + s + "' (expected constant or step)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be finite and non-negative");
  }
  if (max_epochs == 0) throw ValidationError("max_epochs must be positive");
  if (patience == 0) throw ValidationError("patience must be positive");
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  if (schedule == Schedule::constant) return learning_rate;
  return learning_rate * std::pow(0.1, static_cast<double>(epoch / 100));
}

double ssim_loss(const Tensor& reconstruction, const Tensor& target, Tensor* grad) {
  if (reconstruction.shape() != target.shape()) throw ShapeError("ssim loss: reconstruction and target differ in shape");
  const std::size_t n = reconstruction.dim(0);
  const std::size_t per = reconstruction.size() / n;
  if (grad != nullptr) *grad = Tensor(reconstruction.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = reconstruction.values().subspan(i * per, per);
    const auto y = target.values().subspan(i * per, per);
    total += 1.0 - quality::ssim(x, y);
    if (grad != nullptr) {
      const std::vector<float> g = quality::ssim_gradient(x, y);
      for (std::size_t j = 0; j < per; ++j) (*grad)[i * per + j] = -g[j] / static_cast<float>(n);
    }
  }
  return total / static_cast<double>(n);
}

double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) throw ShapeError("cross entropy: logits/labels mismatch");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (grad != nullptr) *grad = Tensor(logits.shape());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) throw ValidationError("label out of range");
    double mx = logits[i * k];
    for (std::size_t c = 1; c < k; ++c) mx = std::max(mx, static_cast<double>(logits[i * k + c]));
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(logits[i * k + c] - mx);
    const double log_z = mx + std::log(z);
    total += log_z - logits[i * k + static_cast<std::size_t>(labels[i])];
    if (grad != nullptr) {
      for (std::size_t c = 0; c < k; ++c) {
        const double p = std::exp(logits[i * k + c] - log_z);
        (*grad)[i * k + c] = static_cast<float>((p - (static_cast<int>(c) == labels[i] ? 1.0 : 0.0)) / static_cast<double>(n));
      }
    }
  }
  return total / static_cast<double>(n);
}

UnsupervisedResult train_unsupervised(const std::vector<io::Volume>& volumes, const AutoencoderSpec& spec,
                                      const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  if (volumes.empty()) throw ValidationError("unsupervised training needs at least one volume");
  for (const io::Volume& v : volumes) check_grid(v, spec);
  std::vector<const io::Volume*> vols;
  for (const io::Volume& v : volumes) vols.push_back(&v);

  std::vector<std::size_t> fold_of(volumes.size(), 0);
  if (cfg.folds > 1) {
    std::vector<std::size_t> order(volumes.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) fold_of[order[i]] = i % cfg.folds;
  }

  UnsupervisedResult result;
  std::vector<Autoencoder> models;
  for (const Split& split : make_splits(fold_of, cfg.folds)) {
    const std::uint64_t fold_seed = cfg.seed + result.runs.size();
    std::mt19937_64 rng(fold_seed);
    Autoencoder model(spec, rng());
    Adam enc_adam(model.encoder.params, cfg.adam), dec_adam(model.decoder, cfg.adam);

    FoldHooks hooks;
    hooks.step = [&](const std::vector<std::size_t>& idx, std::mt19937_64& r, double lr) {
      const Tensor batch = batch_tensor(vols, idx, cfg, &r);
      Tape tape;
      const auto ep = model.encoder.params.bind(tape, true);
      const auto dp = model.decoder.bind(tape, true);
      Var out = model.forward(tape, ep, dp, tape.constant(batch));
      Tensor seed;
      const double loss = ssim_loss(out.value(), batch, &seed);
      tape.backward(out, seed);
      enc_adam.step(model.encoder.params, collect_grads(tape, ep), lr);
      dec_adam.step(model.decoder, collect_grads(tape, dp), lr);
      return loss;
    };
    hooks.evaluate = [&](const std::vector<std::size_t>& idx) {
      double total = 0.0;
      for (std::size_t start = 0; start < idx.size(); start += cfg.batch_size) {
        const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                             idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), start + cfg.batch_size)));
        const Tensor batch = batch_tensor(vols, chunk, cfg, nullptr);
        total += ssim_loss(model.reconstruct(batch), batch) * static_cast<double>(chunk.size());
      }
      return total / static_cast<double>(idx.size());
    };
    hooks.snapshot = [&] {
      std::vector<float> flat = model.encoder.params.flatten();
      const std::vector<float> dec = model.decoder.flatten();
      flat.insert(flat.end(), dec.begin(), dec.end());
      return flat;
    };
    hooks.restore = [&](const std::vector<float>& flat) {
      const std::size_t n = model.encoder.params.scalar_count();
      model.encoder.params.assign(std::span<const float>(flat).first(n));
      model.decoder.assign(std::span<const float>(flat).subspan(n));
    };

    FoldRun run = run_fold(hooks, split.train, split.val, cfg, rng);
    FoldMetrics m;
    m.fold = split.name;
    m.train_loss = run.trace[run.best_epoch].train_loss;
    m.val_loss = run.trace[run.best_epoch].val_loss;
    std::vector<float> orig, recon;
    for (std::size_t i : split.val) {
      const Tensor x = vols[i]->as_sample().reshaped({1, 1, spec.input_dims[0], spec.input_dims[1], spec.input_dims[2]});
      const Tensor y = model.reconstruct(x);
      orig.insert(orig.end(), x.values().begin(), x.values().end());
      recon.insert(recon.end(), y.values().begin(), y.values().end());
    }
    m.reconstruction = reconstruction_metrics(orig, recon);
    result.report.folds.push_back(m);
    result.runs.push_back(std::move(run));
    models.push_back(std::move(model));
  }
  result.best_fold = best_fold(result.report.folds);
  result.model = std::move(models[result.best_fold]);
  return result;
}

std::vector<std::size_t> stratified_folds(const std::vector<LabeledVolume>& data, std::size_t folds,
                                          std::uint64_t seed) {
  std::map<std::string, int> subject_label;
  for (const LabeledVolume& d : data) {
    auto [it, inserted] = subject_label.emplace(d.subject, d.label);
    if (!inserted && it->second != d.label) {
      throw ValidationError("subject " + d.subject + " carries conflicting labels");
    }
  }
  std::map<int, std::vector<std::string>> by_label;
  for (const auto& [subject, label] : subject_label) by_label[label].push_back(subject);
  if (folds > subject_label.size()) throw ValidationError("more folds than subjects");

  std::mt19937_64 rng(seed);
  std::map<std::string, std::size_t> subject_fold;
  std::size_t next = 0;
  for (auto& [label, subjects] : by_label) {
    std::shuffle(subjects.begin(), subjects.end(), rng);
    for (const std::string& s : subjects) subject_fold[s] = next++ % folds;
  }
  std::vector<std::size_t> out;
  for (const LabeledVolume& d : data) out.push_back(subject_fold.at(d.subject));
  return out;
}

std::vector<int> predict(const Classifier& model, const std::vector<io::Volume>& volumes, std::size_t batch) {
  std::vector<Tensor> samples;
  for (const io::Volume& v : volumes) samples.push_back(v.as_sample());
  std::vector<const Tensor*> ptrs;
  for (const Tensor& t : samples) ptrs.push_back(&t);
  const Tensor logits = tensor::evaluate_logits(model, ptrs, batch);
  std::vector<int> out;
  for (std::size_t i = 0; i < volumes.size(); ++i) out.push_back(logits[i * 2 + 1] > logits[i * 2] ? 1 : 0);
  return out;
}

ClassifierResult train_classifier(const std::vector<LabeledVolume>& data, const ClassifierSpec& spec,
                                  const TrainConfig& cfg, const Encoder* pretrained) {
  cfg.validate();
  spec.validate();
  if (data.empty()) throw ValidationError("classifier training needs data");
  bool seen[2] = {false, false};
  for (const LabeledVolume& d : data) {
    if (d.label != 0 && d.label != 1) throw ValidationError("classifier labels must be 0 or 1");
    seen[d.label] = true;
    check_grid(d.volume, spec.encoder);
  }
  if (!seen[0] || !seen[1]) throw ValidationError("classifier cohort contains a single class");
  if (cfg.strategy != Strategy::full && pretrained == nullptr) {
    throw ValidationError("strategy " + to_string(cfg.strategy) + " needs a pretrained encoder");
  }

  std::vector<const io::Volume*> vols;
  std::vector<int> labels;
  for (const LabeledVolume& d : data) {
    vols.push_back(&d.volume);
    labels.push_back(d.label);
  }
  const std::vector<std::size_t> fold_of =
      cfg.folds > 1 ? stratified_folds(data, cfg.folds, cfg.seed) : std::vector<std::size_t>(data.size(), 0);

  ClassifierResult result;
  std::vector<Classifier> models;
  for (const Split& split : make_splits(fold_of, cfg.folds)) {
    const std::uint64_t fold_seed = cfg.seed + result.runs.size();
    std::mt19937_64 rng(fold_seed);
    Classifier model(spec, rng());
    if (cfg.strategy != Strategy::full) copy_params(model.encoder.params, pretrained->params);
    const bool train_encoder = cfg.strategy != Strategy::freeze;
    Adam enc_adam(model.encoder.params, cfg.adam), head_adam(model.head, cfg.adam);

    const auto gather = [&](const std::vector<std::size_t>& idx) {
      std::vector<int> out;
      for (std::size_t i : idx) out.push_back(labels[i]);
      return out;
    };

    FoldHooks hooks;
    hooks.step = [&](const std::vector<std::size_t>& idx, std::mt19937_64& r, double lr) {
      const Tensor batch = batch_tensor(vols, idx, cfg, &r);
      Tape tape;
      const auto ep = model.encoder.params.bind(tape, train_encoder);
      const auto hp = model.head.bind(tape, true);
      Var out = model.forward(tape, ep, hp, tape.constant(batch));
      Tensor seed;
      const double loss = cross_entropy(out.value(), gather(idx), &seed);
      tape.backward(out, seed);
      if (train_encoder) enc_adam.step(model.encoder.params, collect_grads(tape, ep), lr);
      head_adam.step(model.head, collect_grads(tape, hp), lr);
      return loss;
    };
    hooks.evaluate = [&](const std::vector<std::size_t>& idx) {
      std::vector<const Tensor*> ptrs;
      std::vector<Tensor> samples;
      samples.reserve(idx.size());
      for (std::size_t i : idx) samples.push_back(vols[i]->as_sample());
      for (const Tensor& t : samples) ptrs.push_back(&t);
      return cross_entropy(tensor::evaluate_logits(model, ptrs, cfg.batch_size), gather(idx));
    };
    hooks.snapshot = [&] {
      std::vector<float> flat = model.encoder.params.flatten();
      const std::vector<float> head = model.head.flatten();
      flat.insert(flat.end(), head.begin(), head.end());
      return flat;
    };
    hooks.restore = [&](const std::vector<float>& flat) {
      const std::size_t n = model.encoder.params.scalar_count();
      if (train_encoder) model.encoder.params.assign(std::span<const float>(flat).first(n));
      model.head.assign(std::span<const float>(flat).subspan(n));
    };

    FoldRun run = run_fold(hooks, split.train, split.val, cfg, rng);
    FoldMetrics m;
    m.fold = split.name;
    m.train_loss = run.trace[run.best_epoch].train_loss;
    m.val_loss = run.trace[run.best_epoch].val_loss;
    std::vector<io::Volume> val_vols;
    for (std::size_t i : split.val) val_vols.push_back(*vols[i]);
    m.classification = classification_metrics(gather(split.val), predict(model, val_vols, cfg.batch_size));
    result.report.folds.push_back(m);
    result.runs.push_back(std::move(run));
    models.push_back(std::move(model));
  }
  result.best_fold = best_fold(result.report.folds);
  result.model = std::move(models[result.best_fold]);
  return result;
}

}  // namespace survxai::models
