#include "survxai/globalopt/globalopt.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <limits>
#include <thread>
#include <numeric>
#include <optional>
#include <random>

#include "survxai/error.hpp"
#include "survxai/util/format.hpp"

namespace survxai::globalopt {

namespace ops = tensor::ops;
using tensor::Tape;
using tensor::Var;

namespace {

// Unit L2 norm; a zero gradient stays zero.
void normalize(std::vector<float>& g) {
  double s = 0.0;
  for (float v : g) s += static_cast<double>(v) * v;
  if (s == 0.0) return;
  const double inv = 1.0 / std::sqrt(s);
  for (float& v : g) v = static_cast<float>(v * inv);
}

std::vector<const Tensor*> subject_ptrs(const OptimizerInputs& inputs) {
  std::vector<const Tensor*> out;
  for (const Tensor& t : inputs.subjects) out.push_back(&t);
  return out;
}

// A map whose perturbation sums never vary (a constant map) has no defined correlation.
double faithfulness_or_nan(const quality::FaithfulnessProbe& probe, std::span<const float> x,
                           std::span<const std::size_t> which = {}) {
  try {
    return probe.evaluate(x, which);
  } catch (const DegenerateVariance&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

quality::QualityRow score(std::span<const float> e, const OptimizerInputs& inputs,
                          const quality::FaithfulnessProbe& probe, const std::string& name) {
  quality::QualityRow row;
  row.name = name;
  row.faithfulness = faithfulness_or_nan(probe, e);
  row.sparseness = quality::sparseness(e);
  row.ssim = quality::ssim(e, inputs.reference);
  row.residual = quality::map_compare(e, inputs.reference);
  return row;
}

quality::FaithfulnessProbe build_probe(const OptimizerInputs& inputs, const quality::FaithfulnessConfig& cfg) {
  return quality::FaithfulnessProbe::build(*inputs.model, subject_ptrs(inputs), inputs.target, cfg);
}

void require_finite(const LossComponents& c, std::size_t epoch, const std::vector<TraceRow>& trace) {
  if (std::isfinite(c.total)) return;
  std::string msg = "global optimizer diverged at epoch " + std::to_string(epoch) + "; trace:";
  for (const TraceRow& r : trace) msg += " " + util::fmt_double(r.loss.total);
  throw DivergenceError(msg);
}

}  // namespace

std::string to_string(SimilarityTerm t) { return t == SimilarityTerm::aligned ? "aligned" : "as-written"; }
std::string to_string(SparsenessTerm t) { return t == SparsenessTerm::penalized ? "penalized" : "rewarded"; }

SimilarityTerm parse_similarity(const std::string& s) {
  if (s == "aligned") return SimilarityTerm::aligned;
  if (s == "as-written" || s == "as_written") return SimilarityTerm::as_written;
  throw ValidationError("unknown similarity term '" + s + "' (expected aligned or as-written)");
}

SparsenessTerm parse_sparseness(const std::string& s) {
  if (s == "penalized") return SparsenessTerm::penalized;
  if (s == "rewarded") return SparsenessTerm::rewarded;
  throw ValidationError("unknown sparseness term '" + s + "' (expected penalized or rewarded)");
}

void LossWeights::validate() const {
  if (l1 < 0.0 || l2 < 0.0 || l3 < 0.0) throw ValidationError("loss weights must be non-negative");
  if (std::abs(l1 + l2 + l3 - 1.0) > 1e-9) throw ValidationError("loss weights must sum to 1");
}

double combine_loss(double faithfulness, double sparseness, double ssim, const LossOptions& opts) {
  const LossWeights& w = opts.weights;
  const double faith = w.l1 == 0.0 ? 0.0 : w.l1 / std::max(faithfulness, opts.faith_floor);
  const double sparse = opts.sparseness == SparsenessTerm::penalized ? sparseness : 1.0 - sparseness;
  const double sim = opts.similarity == SimilarityTerm::aligned ? 1.0 - ssim : ssim;
  return faith + w.l2 * sparse + w.l3 * sim;
}

LossComponents total_loss(std::span<const float> x, std::span<const float> y, const quality::FaithfulnessProbe& probe,
                          const LossOptions& opts, std::span<const std::size_t> which) {
  LossComponents c;
  c.faithfulness = opts.weights.l1 == 0.0 ? faithfulness_or_nan(probe, x, which) : probe.evaluate(x, which);
  c.sparseness = quality::sparseness(x);
  c.ssim = quality::ssim(x, y);
  c.total = combine_loss(c.faithfulness, c.sparseness, c.ssim, opts);
  return c;
}

LossComponents total_loss_with_gradient(std::span<const float> x, std::span<const float> y,
                                        const quality::FaithfulnessProbe& probe, const LossOptions& opts,
                                        std::span<const std::size_t> which, std::vector<float>& grad) {
  LossComponents c;
  std::vector<float> dfaith;
  c.faithfulness = probe.evaluate_with_gradient(x, which, dfaith);
  c.sparseness = quality::sparseness(x);
  c.ssim = quality::ssim(x, y);
  c.total = combine_loss(c.faithfulness, c.sparseness, c.ssim, opts);

  const std::vector<float> dsparse = quality::sparseness_gradient(x);
  const std::vector<float> dssim = quality::ssim_gradient(x, y);
  const LossWeights& w = opts.weights;
  // Below the floor the clamp is flat; its tangent at the floor still points towards higher faithfulness.
  const double m = std::max(c.faithfulness, opts.faith_floor);
  const double kf = -w.l1 / (m * m);
  const double ks = opts.sparseness == SparsenessTerm::penalized ? w.l2 : -w.l2;
  const double kq = opts.similarity == SimilarityTerm::aligned ? -w.l3 : w.l3;
  grad.assign(x.size(), 0.0f);
  for (std::size_t i = 0; i < x.size(); ++i) {
    grad[i] = static_cast<float>(kf * dfaith[i] + ks * dsparse[i] + kq * dssim[i]);
  }
  return c;
}

void OptimizerInputs::validate() const {
  if (model == nullptr) throw ValidationError("optimizer inputs need a model");
  if (subjects.empty()) throw ValidationError("optimizer inputs need evaluation subjects");
  const std::size_t n = header.voxel_count();
  if (reference.size() != n) throw ShapeError("structural reference does not match the map grid");
  for (const auto& m : maps) {
    if (m.size() != n) throw ShapeError("optimizer input map does not match the grid");
  }
  for (const Tensor& s : subjects) {
    tensor::check_sample(*model, s);
    if (s.size() != n) throw ShapeError("evaluation subject does not match the map grid");
  }
  tensor::check_target(*model, target);
}

void OptConfig::validate() const {
  loss.weights.validate();
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("optimizer learning rate must be finite and non-negative");
  }
  if (max_epochs == 0 || steps_per_epoch == 0) throw ValidationError("optimizer needs at least one epoch and step");
  if (subsets_per_epoch < 3) throw ValidationError("optimizer needs at least 3 subsets per epoch");
  if (probe_pool < 3) throw ValidationError("optimizer needs at least 3 held-out subsets");
  if (train_pool > 0 && train_pool < subsets_per_epoch) {
    throw ValidationError("optimizer training pool smaller than subsets per epoch");
  }
  if (!(loss.faith_floor > 0.0)) throw ValidationError("faithfulness floor must be positive");
  evaluation.validate();
}

OptimizerNet::OptimizerNet(std::array<std::size_t, 3> dims, std::array<std::size_t, 2> widths, std::uint64_t seed) {
  for (std::size_t d : dims) {
    if (d < 4 || d % 4 != 0) throw ValidationError("optimizer grid dims must be positive multiples of 4");
  }
  std::mt19937_64 rng(seed);
  const auto [a, b] = widths;
  convs_[0] = models::Conv3dLayer::create(params, "down1", 4, a, 3, rng);
  convs_[1] = models::Conv3dLayer::create(params, "down2", a, b, 3, rng);
  convs_[2] = models::Conv3dLayer::create(params, "bottom", b, b, 3, rng);
  convs_[3] = models::Conv3dLayer::create(params, "up1", b + b, b, 3, rng);
  convs_[4] = models::Conv3dLayer::create(params, "up2", b + a, a, 3, rng);
  out_ = models::Conv3dLayer::create(params, "out", a + 4, 1, 1, rng);
}

Var OptimizerNet::forward(Tape&, const std::vector<Var>& p, Var x) const {
  Var e1 = ops::relu(convs_[0](p, x));
  Var e2 = ops::relu(convs_[1](p, ops::max_pool3d(e1, 2)));
  Var mid = ops::relu(convs_[2](p, ops::max_pool3d(e2, 2)));
  Var u1 = ops::relu(convs_[3](p, ops::concat({ops::upsample_nearest3d(mid, 2), e2}, 1)));
  Var u2 = ops::relu(convs_[4](p, ops::concat({ops::upsample_nearest3d(u1, 2), e1}, 1)));
  return ops::sigmoid(out_(p, ops::concat({u2, x}, 1)));
}

std::vector<float> OptimizerNet::predict(const Tensor& input) const {
  Tape tape;
  const auto p = params.bind(tape, false);
  return forward(tape, p, tape.constant(input)).value().storage();
}

Tensor stack_inputs(const OptimizerInputs& inputs) {
  const auto& d = inputs.header.dims;
  const std::size_t n = inputs.header.voxel_count();
  Tensor t({1, 4, d[0], d[1], d[2]});
  for (std::size_t c = 0; c < 4; ++c) std::copy(inputs.maps[c].begin(), inputs.maps[c].end(), t.data() + c * n);
  return t;
}

GlobalExplanation optimize(const OptimizerInputs& inputs, const OptConfig& cfg) {
  inputs.validate();
  cfg.validate();
  const std::size_t n = inputs.reference.size();
  const Tensor input = stack_inputs(inputs);

  // Held-out subsets score the trace and pick the best epoch; training draws fresh ones each epoch.
  quality::FaithfulnessConfig pool_cfg = cfg.evaluation;
  pool_cfg.n_perturbations = cfg.probe_pool;
  pool_cfg.seed = cfg.seed + cfg.subset_seed_offset;
  const quality::FaithfulnessProbe probe = build_probe(inputs, pool_cfg);

  const auto& d = inputs.header.dims;
  OptimizerNet net({d[0], d[1], d[2]}, cfg.widths, cfg.seed);
  models::Adam adam(net.params, cfg.adam);

  GlobalExplanation out;
  out.header = inputs.header;
  out.header.dtype = io::DType::f32;
  out.config = cfg;
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::vector<float> grad;
  std::optional<quality::FaithfulnessProbe> pool;
  if (cfg.train_pool > 0) {
    quality::FaithfulnessConfig train_cfg = cfg.evaluation;
    train_cfg.n_perturbations = cfg.train_pool;
    train_cfg.seed = cfg.seed + 2 * cfg.subset_seed_offset;
    pool = build_probe(inputs, train_cfg);
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(cfg.train_pool);
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    // Subsets stay fixed within the epoch so every step sees the same loss.
    std::optional<quality::FaithfulnessProbe> fresh;
    std::vector<std::size_t> which;
    if (pool) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      which.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cfg.subsets_per_epoch));
      std::sort(which.begin(), which.end());
    } else {
      quality::FaithfulnessConfig epoch_cfg = cfg.evaluation;
      epoch_cfg.n_perturbations = cfg.subsets_per_epoch;
      epoch_cfg.seed = cfg.seed + cfg.subset_seed_offset * (epoch + 3);
      fresh = build_probe(inputs, epoch_cfg);
    }
    const quality::FaithfulnessProbe& train = pool ? *pool : *fresh;
    for (std::size_t step = 0; step < cfg.steps_per_epoch; ++step) {
      Tape tape;
      const auto p = net.params.bind(tape, true);
      Var y = net.forward(tape, p, tape.constant(input));
      const LossComponents c =
          total_loss_with_gradient(y.value().values(), inputs.reference, train, cfg.loss, which, grad);
      require_finite(c, epoch, out.trace);
      // 1/M swings the gradient scale by orders of magnitude; Adam's second moment would remember the spikes.
      normalize(grad);
      tape.backward(y, Tensor(y.shape(), grad));
      adam.step(net.params, models::collect_grads(tape, p), cfg.learning_rate);
    }
    std::vector<float> current = net.predict(input);
    TraceRow row;
    row.epoch = epoch;
    row.loss = total_loss(current, inputs.reference, probe, cfg.loss);
    require_finite(row.loss, epoch, out.trace);
    if (row.loss.total < best) {
      best = row.loss.total;
      out.values = std::move(current);
      out.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    row.best_total = best;
    out.trace.push_back(row);
    if (epoch + 1 >= cfg.patience_start && stale >= cfg.patience) break;
  }
  if (out.values.size() != n) throw Error("optimizer produced no explanation");

  const quality::QualityRow q = evaluate_global(out.values, inputs, cfg.evaluation);
  out.final_loss.faithfulness = q.faithfulness;
  out.final_loss.sparseness = q.sparseness;
  out.final_loss.ssim = q.ssim;
  out.final_loss.total = combine_loss(q.faithfulness, q.sparseness, q.ssim, cfg.loss);
  return out;
}

quality::QualityRow evaluate_global(std::span<const float> explanation, const OptimizerInputs& inputs,
                                    const quality::FaithfulnessConfig& cfg, const std::string& name) {
  inputs.validate();
  if (explanation.size() != inputs.reference.size()) throw ShapeError("explanation does not match the map grid");
  for (float v : explanation) {
    if (!std::isfinite(v)) throw ValidationError("explanation contains non-finite values");
  }
  return score(explanation, inputs, build_probe(inputs, cfg), name);
}

std::vector<LossWeights> default_weight_grid() {
  return {{0.4, 0.3, 0.3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.6, 0.2, 0.2}, {0.2, 0.4, 0.4}, {0.8, 0.1, 0.1}};
}

std::vector<double> default_learning_rates() { return {5e-2, 5e-3, 5e-4, 5e-5}; }

std::vector<GridEntry> grid_search(const OptimizerInputs& inputs, const std::vector<LossWeights>& weights,
                                   const std::vector<double>& learning_rates, const OptConfig& base) {
  if (weights.empty() || learning_rates.empty()) throw ValidationError("grid search needs non-empty grids");
  inputs.validate();
  const quality::FaithfulnessProbe eval_probe = build_probe(inputs, base.evaluation);
  LossOptions ranking = base.loss;
  ranking.weights = LossWeights{};

  std::vector<GridEntry> entries;
  for (const LossWeights& w : weights) {
    for (double lr : learning_rates) {
      GridEntry e;
      e.config = base;
      e.config.loss.weights = w;
      e.config.learning_rate = lr;
      e.quality.name = "l=(" + util::fmt_double(w.l1) + ";" + util::fmt_double(w.l2) + ";" + util::fmt_double(w.l3) +
                       ") lr=" + util::fmt_double(lr);
      entries.push_back(std::move(e));
    }
  }
  // Runs are independent and seeded, and each writes only its own slot.
  auto run = [&](GridEntry& e) {
    try {
      e.result = optimize(inputs, e.config);
      e.quality = score(e.result.values, inputs, eval_probe, e.quality.name);
      e.ranking_loss = combine_loss(e.quality.faithfulness, e.quality.sparseness, e.quality.ssim, ranking);
    } catch (const Error& err) {
      e.aborted = true;
      e.error = err.what();
    }
  };
  const std::size_t workers = std::min<std::size_t>(entries.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) run(entries[i]);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (std::all_of(entries.begin(), entries.end(), [](const GridEntry& e) { return e.aborted; })) {
    throw Error("every grid-search run aborted; first error: " + entries.front().error);
  }
  std::stable_sort(entries.begin(), entries.end(), [](const GridEntry& a, const GridEntry& b) {
    if (a.aborted != b.aborted) return !a.aborted;
    return a.ranking_loss < b.ranking_loss;
  });
  return entries;
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "epoch,total,faithfulness,sparseness,ssim,best_total\n";
  for (const TraceRow& r : trace) {
    out += util::csv_row({std::to_string(r.epoch), util::fmt_double(r.loss.total), util::fmt_double(r.loss.faithfulness),
                          util::fmt_double(r.loss.sparseness), util::fmt_double(r.loss.ssim),
                          util::fmt_double(r.best_total)});
  }
  return out;
}

}  // namespace survxai::globalopt
