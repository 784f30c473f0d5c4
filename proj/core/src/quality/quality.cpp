#include "survxai/quality/quality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "survxai/error.hpp"
#include "survxai/util/format.hpp"

namespace survxai::quality {
namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": sizes differ (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

double subset_sum(std::span<const float> g, const Subset& s) {
  double acc = 0.0;
  for (std::uint32_t i : s) acc += g[i];
  return acc;
}

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(var / static_cast<double>(v.size()));
  return m;
}

bool degenerate(std::span<const double> v, const Moments& m) {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  return m.sd == 0.0 || m.sd <= 1e-9 * scale;
}

}  // namespace

void FaithfulnessConfig::validate() const {
  if (n_perturbations < 3) throw ValidationError("faithfulness needs at least 3 perturbations");
  if (!(subset_fraction > 0.0 && subset_fraction < 1.0)) {
    throw ValidationError("faithfulness subset fraction must be in (0, 1)");
  }
}

std::size_t FaithfulnessConfig::subset_size(std::size_t features) const {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(subset_fraction * static_cast<double>(features) - 1e-9)));
}

std::vector<Subset> draw_subsets(std::size_t features, const FaithfulnessConfig& cfg) {
  cfg.validate();
  if (features < 2) throw ValidationError("faithfulness needs at least 2 features");
  const std::size_t k = cfg.subset_size(features);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::uint32_t> idx(features);
  std::vector<Subset> out;
  for (std::size_t n = 0; n < cfg.n_perturbations; ++n) {
    std::iota(idx.begin(), idx.end(), 0u);
    // Partial Fisher-Yates: the first k entries form a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, features - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    Subset s(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(s.begin(), s.end());
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> output_drops(const DifferentiableModel& model, const Tensor& x, std::size_t target,
                                 const std::vector<Subset>& subsets, std::size_t batch) {
  tensor::check_sample(model, x);
  tensor::check_target(model, target);
  std::vector<Tensor> perturbed;
  perturbed.reserve(subsets.size() + 1);
  perturbed.push_back(x);
  for (const Subset& s : subsets) {
    Tensor p = x;
    for (std::uint32_t i : s) p[i] = 0.0f;
    perturbed.push_back(std::move(p));
  }
  std::vector<const Tensor*> ptrs;
  for (const Tensor& t : perturbed) ptrs.push_back(&t);
  const std::vector<double> f = tensor::class_logits(model, ptrs, target, batch);
  std::vector<double> drops(subsets.size());
  for (std::size_t k = 0; k < subsets.size(); ++k) drops[k] = f[0] - f[k + 1];
  return drops;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "pearson");
  if (a.size() < 2) throw ValidationError("pearson needs at least 2 pairs");
  const Moments ma = moments(a), mb = moments(b);
  if (degenerate(a, ma)) throw DegenerateVariance("attribution sums have zero variance across perturbations");
  if (degenerate(b, mb)) throw DegenerateVariance("model output changes have zero variance across perturbations");
  double cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) cov += (a[i] - ma.mean) * (b[i] - mb.mean);
  cov /= static_cast<double>(a.size());
  return std::clamp(cov / (ma.sd * mb.sd), -1.0, 1.0);
}

double faithfulness(const DifferentiableModel& model, std::span<const float> g, const Tensor& x,
                    std::size_t target, const FaithfulnessConfig& cfg) {
  require_same_size(g.size(), x.size(), "faithfulness");
  const std::vector<Subset> subsets = draw_subsets(x.size(), cfg);
  const std::vector<double> drops = output_drops(model, x, target, subsets);
  std::vector<double> sums;
  for (const Subset& s : subsets) sums.push_back(subset_sum(g, s));
  return pearson(sums, drops);
}

std::uint64_t subject_seed(std::uint64_t seed, std::size_t subject) {
  return seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(subject);
}

double cohort_faithfulness(const DifferentiableModel& model, std::span<const float> g,
                           const std::vector<const Tensor*>& subjects, std::size_t target,
                           const FaithfulnessConfig& cfg) {
  return FaithfulnessProbe::build(model, subjects, target, cfg).evaluate(g);
}

FaithfulnessProbe FaithfulnessProbe::build(const DifferentiableModel& model, const std::vector<const Tensor*>& subjects,
                                           std::size_t target, const FaithfulnessConfig& cfg, std::size_t batch) {
  if (subjects.empty()) throw ValidationError("faithfulness needs at least one subject");
  FaithfulnessProbe p;
  p.features = subjects.front()->size();
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    if (subjects[s]->size() != p.features) throw ShapeError("faithfulness subjects differ in size");
    FaithfulnessConfig c = cfg;
    c.seed = subject_seed(cfg.seed, s);
    p.subsets.push_back(draw_subsets(p.features, c));
    p.drops.push_back(output_drops(model, *subjects[s], target, p.subsets.back(), batch));
  }
  return p;
}

double FaithfulnessProbe::evaluate(std::span<const float> g, std::span<const std::size_t> which) const {
  return evaluate_impl(g, which, nullptr);
}

double FaithfulnessProbe::evaluate_with_gradient(std::span<const float> g, std::span<const std::size_t> which,
                                                 std::vector<float>& grad) const {
  grad.assign(g.size(), 0.0f);
  return evaluate_impl(g, which, &grad);
}

double FaithfulnessProbe::evaluate_impl(std::span<const float> g, std::span<const std::size_t> which,
                                        std::vector<float>* grad) const {
  require_same_size(g.size(), features, "faithfulness probe");
  if (drops.empty()) throw ValidationError("empty faithfulness probe");
  std::vector<std::size_t> chosen(which.begin(), which.end());
  if (chosen.empty()) {
    chosen.resize(subset_count());
    std::iota(chosen.begin(), chosen.end(), 0);
  }
  const std::size_t n = chosen.size();
  const double count = static_cast<double>(drops.size());
  std::vector<double> a(n), b(n);
  double total = 0.0;
  for (std::size_t s = 0; s < drops.size(); ++s) {
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = subset_sum(g, subsets[s].at(chosen[k]));
      b[k] = drops[s].at(chosen[k]);
    }
    const double r = pearson(a, b);
    total += r;
    if (grad == nullptr) continue;
    const Moments ma = moments(a), mb = moments(b);
    // d r / d a_k = [ (b_k - mean_b)/(sd_a sd_b) - r (a_k - mean_a)/sd_a^2 ] / n
    for (std::size_t k = 0; k < n; ++k) {
      const double d = ((b[k] - mb.mean) / (ma.sd * mb.sd) - r * (a[k] - ma.mean) / (ma.sd * ma.sd)) /
                       (static_cast<double>(n) * count);
      const float v = static_cast<float>(d);
      for (std::uint32_t i : subsets[s][chosen[k]]) (*grad)[i] += v;
    }
  }
  return total / count;
}

double sparseness(std::span<const float> g) {
  if (g.empty()) throw ValidationError("sparseness of an empty attribution");
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) v[i] = std::abs(static_cast<double>(g[i]));
  std::sort(v.begin(), v.end());
  const double l1 = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(l1 > 0.0)) throw ValidationError("sparseness undefined for an all-zero attribution");
  const double d = static_cast<double>(v.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) acc += (v[k] / l1) * ((d - static_cast<double>(k + 1) + 0.5) / d);
  return 1.0 - 2.0 * acc;
}

std::vector<float> sparseness_gradient(std::span<const float> g) {
  if (g.empty()) throw ValidationError("sparseness of an empty attribution");
  const std::size_t d = g.size();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(g[a]) < std::abs(g[b]); });
  double l1 = 0.0, weighted = 0.0;
  std::vector<double> coef(d);
  for (std::size_t k = 0; k < d; ++k) {
    coef[order[k]] = (static_cast<double>(d) - static_cast<double>(k + 1) + 0.5) / static_cast<double>(d);
    const double v = std::abs(static_cast<double>(g[order[k]]));
    l1 += v;
    weighted += v * coef[order[k]];
  }
  if (!(l1 > 0.0)) throw ValidationError("sparseness undefined for an all-zero attribution");
  std::vector<float> grad(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double sign = g[j] > 0.0f ? 1.0 : (g[j] < 0.0f ? -1.0 : 0.0);
    grad[j] = static_cast<float>(-2.0 * sign * (coef[j] * l1 - weighted) / (l1 * l1));
  }
  return grad;
}

namespace {

struct SsimTerms {
  double mx, my, vx, vy, cxy;
};

SsimTerms ssim_terms(std::span<const float> x, std::span<const float> y) {
  require_same_size(x.size(), y.size(), "ssim");
  if (x.empty()) throw ValidationError("ssim of empty maps");
  const double n = static_cast<double>(x.size());
  SsimTerms t{0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    t.mx += x[i];
    t.my += y[i];
  }
  t.mx /= n;
  t.my /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - t.mx, dy = y[i] - t.my;
    t.vx += dx * dx;
    t.vy += dy * dy;
    t.cxy += dx * dy;
  }
  t.vx /= n;
  t.vy /= n;
  t.cxy /= n;
  return t;
}

}  // namespace

double ssim(std::span<const float> x, std::span<const float> y, double c1, double c2) {
  if (!(c1 > 0.0 && c2 > 0.0)) throw ValidationError("ssim constants must be positive");
  if (x.data() == y.data() && x.size() == y.size()) return 1.0;
  const SsimTerms t = ssim_terms(x, y);
  const double a1 = 2.0 * t.mx * t.my + c1, a2 = 2.0 * t.cxy + c2;
  const double b1 = t.mx * t.mx + t.my * t.my + c1, b2 = t.vx + t.vy + c2;
  // Identical inputs give a1 == b1 and a2 == b2 exactly.
  if (a1 == b1 && a2 == b2) return 1.0;
  return (a1 * a2) / (b1 * b2);
}

std::vector<float> ssim_gradient(std::span<const float> x, std::span<const float> y, double c1, double c2) {
  const SsimTerms t = ssim_terms(x, y);
  const double n = static_cast<double>(x.size());
  const double a1 = 2.0 * t.mx * t.my + c1, a2 = 2.0 * t.cxy + c2;
  const double b1 = t.mx * t.mx + t.my * t.my + c1, b2 = t.vx + t.vy + c2;
  const double s = (a1 * a2) / (b1 * b2);
  std::vector<float> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double da1 = 2.0 * t.my / n;
    const double da2 = 2.0 * (y[i] - t.my) / n;
    const double db1 = 2.0 * t.mx / n;
    const double db2 = 2.0 * (x[i] - t.mx) / n;
    grad[i] = static_cast<float>((da1 * a2 + a1 * da2) / (b1 * b2) - s * (db1 / b1 + db2 / b2));
  }
  return grad;
}

ResidualStats map_compare(std::span<const float> g, std::span<const float> reference) {
  require_same_size(g.size(), reference.size(), "map_compare");
  if (g.empty()) throw ValidationError("map_compare of empty maps");
  double sq = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = static_cast<double>(g[i]) - reference[i];
    sq += r * r;
    ab += std::abs(r);
  }
  const double n = static_cast<double>(g.size());
  ResidualStats s;
  s.msm = sq / n;
  s.rmse = std::sqrt(s.msm);
  s.mae = ab / n;
  return s;
}

std::string QualityReport::to_csv() const {
  std::string out = "name,rmse,mae,msm,sparseness,faithfulness,ssim\n";
  for (const QualityRow& r : rows) {
    out += util::csv_row({r.name, util::fmt_double(r.residual.rmse), util::fmt_double(r.residual.mae),
                          util::fmt_double(r.residual.msm), util::fmt_double(r.sparseness),
                          util::fmt_double(r.faithfulness), util::fmt_double(r.ssim)});
  }
  return out;
}

void QualityReport::write_csv(const std::filesystem::path& path) const { util::write_text(path, to_csv()); }

}  // namespace survxai::quality
