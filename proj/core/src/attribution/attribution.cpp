#include "survxai/attribution/attribution.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "survxai/error.hpp"
#include "survxai/io/normalize.hpp"
#include "survxai/latent/pca.hpp"
#include "survxai/util/format.hpp"

namespace survxai::attribution {
namespace {

std::vector<const Tensor*> pointers(const std::vector<Tensor>& xs) {
  std::vector<const Tensor*> out;
  out.reserve(xs.size());
  for (const Tensor& t : xs) out.push_back(&t);
  return out;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": " + tensor::shape_string(a.shape()) + " vs " +
                     tensor::shape_string(b.shape()));
  }
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::input_x_gradient: return "input_x_gradient";
    case Method::integrated_gradients: return "integrated_gradients";
    case Method::gradient_shap: return "gradient_shap";
    case Method::guided_backprop: return "guided_backprop";
    case Method::guided_gradcam: return "guided_gradcam";
    case Method::kernel_shap: return "kernel_shap";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("unknown attribution method '" + s + "'");
}

std::vector<Tensor> gradients(const DifferentiableModel& model, const std::vector<Tensor>& xs, std::size_t target,
                              BackwardMode mode, std::size_t batch) {
  tensor::check_target(model, target);
  for (const Tensor& x : xs) tensor::check_sample(model, x);
  batch = std::max<std::size_t>(batch, 1);
  std::vector<Tensor> out;
  out.reserve(xs.size());
  const std::size_t per = tensor::shape_size(model.sample_shape());
  for (std::size_t start = 0; start < xs.size(); start += batch) {
    const std::size_t stop = std::min(xs.size(), start + batch);
    std::vector<const Tensor*> chunk;
    for (std::size_t i = start; i < stop; ++i) chunk.push_back(&xs[i]);
    tensor::Tape tape(mode);
    tensor::Var in = tape.leaf(tensor::stack(chunk));
    tensor::Var logits = model.logits(tape, in);
    Tensor seed(logits.shape());
    for (std::size_t r = 0; r < chunk.size(); ++r) seed[r * model.num_classes() + target] = 1.0f;
    tape.backward(logits, seed);
    const Tensor g = tape.grad(in);
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      out.emplace_back(model.sample_shape(),
                       std::vector<float>(g.data() + r * per, g.data() + (r + 1) * per));
    }
  }
  return out;
}

Tensor gradient(const DifferentiableModel& model, const Tensor& x, std::size_t target, BackwardMode mode) {
  return gradients(model, {x}, target, mode).front();
}

Tensor input_x_gradient(const DifferentiableModel& model, const Tensor& x, std::size_t target) {
  return hadamard(x, gradient(model, x, target));
}

Tensor integrated_gradients(const DifferentiableModel& model, const Tensor& x, std::size_t target, std::size_t steps,
                            const Tensor* baseline, std::size_t batch) {
  if (steps < 2) throw ValidationError("integrated gradients needs at least 2 steps");
  const Tensor zero(x.shape());
  const Tensor& base = baseline != nullptr ? *baseline : zero;
  check_same_shape(x, base, "integrated gradients baseline");
  Tensor delta = x;
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= base[i];

  Tensor avg(x.shape());
  for (std::size_t start = 1; start <= steps; start += batch) {
    std::vector<Tensor> points;
    for (std::size_t k = start; k <= std::min(steps, start + batch - 1); ++k) {
      const float t = static_cast<float>(static_cast<double>(k) / static_cast<double>(steps));
      Tensor p = base;
      for (std::size_t i = 0; i < p.size(); ++i) p[i] += t * delta[i];
      points.push_back(std::move(p));
    }
    for (const Tensor& g : gradients(model, points, target, BackwardMode::standard, batch)) {
      for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += g[i];
    }
  }
  for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = delta[i] * (avg[i] / static_cast<float>(steps));
  return avg;
}

Tensor gradient_shap(const DifferentiableModel& model, const Tensor& x, std::size_t target,
                     const GradientShapConfig& cfg) {
  if (cfg.samples < 1) throw ValidationError("gradient shap needs at least one sample");
  if (!(cfg.noise_std >= 0.0)) throw ValidationError("gradient shap noise std must be non-negative");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, cfg.noise_std > 0.0 ? cfg.noise_std : 1.0);
  std::vector<Tensor> points;
  points.reserve(cfg.samples);
  for (std::size_t s = 0; s < cfg.samples; ++s) {
    const double u = unit(rng);
    Tensor p = x;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double eps = cfg.noise_std > 0.0 ? noise(rng) : 0.0;
      p[i] = static_cast<float>(u * (static_cast<double>(x[i]) + eps));
    }
    points.push_back(std::move(p));
  }
  Tensor avg(x.shape());
  for (const Tensor& g : gradients(model, points, target)) {
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += g[i];
  }
  for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = x[i] * (avg[i] / static_cast<float>(cfg.samples));
  return avg;
}

Tensor guided_backprop(const DifferentiableModel& model, const Tensor& x, std::size_t target) {
  return gradient(model, x, target, BackwardMode::guided);
}

Tensor grad_cam(const DifferentiableModel& model, const Tensor& x, std::size_t target, const std::string& layer) {
  tensor::check_sample(model, x);
  tensor::check_target(model, target);
  if (x.rank() != 4) throw ShapeError("grad-cam needs a [C, D, H, W] sample, got " + tensor::shape_string(x.shape()));
  tensor::Tape tape;
  tensor::Var in = tape.leaf(tensor::stack({&x}));
  tensor::Var logits = model.logits(tape, in);
  Tensor seed(logits.shape());
  seed[target] = 1.0f;
  tape.backward(logits, seed);
  const tensor::Capture cap = tape.capture(layer);
  if (cap.activations.rank() != 5 || cap.activations.dim(0) != 1) {
    throw ShapeError("grad-cam layer '" + layer + "' is not a volumetric feature map");
  }
  const std::size_t channels = cap.activations.dim(1);
  const std::array<std::uint32_t, 3> small{static_cast<std::uint32_t>(cap.activations.dim(2)),
                                           static_cast<std::uint32_t>(cap.activations.dim(3)),
                                           static_cast<std::uint32_t>(cap.activations.dim(4))};
  const std::size_t vox = static_cast<std::size_t>(small[0]) * small[1] * small[2];
  std::vector<float> cam(vox, 0.0f);
  for (std::size_t c = 0; c < channels; ++c) {
    double w = 0.0;
    for (std::size_t v = 0; v < vox; ++v) w += cap.gradients[c * vox + v];
    w /= static_cast<double>(vox);
    for (std::size_t v = 0; v < vox; ++v) cam[v] += static_cast<float>(w * cap.activations[c * vox + v]);
  }
  for (float& v : cam) v = std::max(v, 0.0f);
  const std::array<std::uint32_t, 3> full{static_cast<std::uint32_t>(x.dim(1)), static_cast<std::uint32_t>(x.dim(2)),
                                          static_cast<std::uint32_t>(x.dim(3))};
  const std::vector<float> up = io::resize_trilinear(cam, small, full);
  Tensor out(x.shape());
  const std::size_t per = up.size();
  for (std::size_t c = 0; c < x.dim(0); ++c) std::copy(up.begin(), up.end(), out.data() + c * per);
  return out;
}

Tensor guided_gradcam(const DifferentiableModel& model, const Tensor& x, std::size_t target,
                      const std::string& layer) {
  return hadamard(grad_cam(model, x, target, layer), guided_backprop(model, x, target));
}

std::vector<std::vector<std::uint32_t>> feature_groups(const tensor::Shape& shape, std::size_t g) {
  if (g == 0) throw ValidationError("kernel shap group size must be positive");
  std::vector<std::vector<std::uint32_t>> groups;
  const std::size_t n = tensor::shape_size(shape);
  if (shape.size() != 4) {
    for (std::size_t start = 0; start < n; start += g) {
      std::vector<std::uint32_t> grp;
      for (std::size_t i = start; i < std::min(n, start + g); ++i) grp.push_back(static_cast<std::uint32_t>(i));
      groups.push_back(std::move(grp));
    }
    return groups;
  }
  const std::size_t c = shape[0], d = shape[1], h = shape[2], w = shape[3];
  for (std::size_t bz = 0; bz < d; bz += g)
    for (std::size_t by = 0; by < h; by += g)
      for (std::size_t bx = 0; bx < w; bx += g) {
        std::vector<std::uint32_t> grp;
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t z = bz; z < std::min(d, bz + g); ++z)
            for (std::size_t y = by; y < std::min(h, by + g); ++y)
              for (std::size_t x = bx; x < std::min(w, bx + g); ++x)
                grp.push_back(static_cast<std::uint32_t>(((ch * d + z) * h + y) * w + x));
        groups.push_back(std::move(grp));
      }
  return groups;
}

Tensor kernel_shap(const DifferentiableModel& model, const Tensor& x, std::size_t target,
                   const KernelShapConfig& cfg) {
  tensor::check_sample(model, x);
  const auto groups = feature_groups(x.shape(), cfg.group_size);
  const std::size_t m = groups.size();
  if (cfg.coalitions < m + 2) {
    throw ValidationError("kernel shap needs at least " + std::to_string(m + 2) + " coalitions for " +
                          std::to_string(m) + " groups, got " + std::to_string(cfg.coalitions));
  }

  std::vector<std::vector<std::uint8_t>> masks;
  std::vector<double> weights;
  const bool exhaustive = m < 31 && (std::size_t{1} << m) <= cfg.coalitions;
  if (exhaustive) {
    for (std::size_t bits = 1; bits + 1 < (std::size_t{1} << m); ++bits) {
      std::vector<std::uint8_t> z(m);
      std::size_t s = 0;
      for (std::size_t j = 0; j < m; ++j) s += z[j] = static_cast<std::uint8_t>((bits >> j) & 1u);
      masks.push_back(std::move(z));
      weights.push_back(static_cast<double>(m - 1) / (binomial(m, s) * static_cast<double>(s * (m - s))));
    }
  } else if (m > 1) {
    // Sizes drawn in proportion to the total kernel mass of each size; unit weights.
    std::vector<double> size_mass;
    for (std::size_t s = 1; s < m; ++s) size_mass.push_back(static_cast<double>(m - 1) / static_cast<double>(s * (m - s)));
    std::discrete_distribution<std::size_t> pick_size(size_mass.begin(), size_mass.end());
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> idx(m);
    for (std::size_t n = 0; n + 2 < cfg.coalitions; ++n) {
      const std::size_t s = pick_size(rng) + 1;
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < s; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, m - 1);
        std::swap(idx[i], idx[pick(rng)]);
      }
      std::vector<std::uint8_t> z(m, 0);
      for (std::size_t i = 0; i < s; ++i) z[idx[i]] = 1;
      masks.push_back(std::move(z));
      weights.push_back(1.0);
    }
  }

  std::vector<Tensor> inputs;
  inputs.reserve(masks.size() + 2);
  inputs.push_back(x);
  inputs.emplace_back(x.shape());
  for (const auto& z : masks) {
    Tensor p(x.shape());
    for (std::size_t j = 0; j < m; ++j) {
      if (z[j]) {
        for (std::uint32_t i : groups[j]) p[i] = x[i];
      }
    }
    inputs.push_back(std::move(p));
  }
  const std::vector<double> f = tensor::class_logits(model, pointers(inputs), target);
  const double fx = f[0], f0 = f[1], total = fx - f0;

  std::vector<double> phi(m, 0.0);
  if (m == 1) {
    phi[0] = total;
  } else {
    // Eliminate the last group with sum(phi) = total, then weighted least squares.
    const auto rows = static_cast<Eigen::Index>(masks.size());
    const auto cols = static_cast<Eigen::Index>(m - 1);
    Eigen::MatrixXd a(rows, cols);
    Eigen::VectorXd b(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& z = masks[static_cast<std::size_t>(r)];
      const double sw = std::sqrt(weights[static_cast<std::size_t>(r)]);
      const double zl = z[m - 1];
      for (Eigen::Index c = 0; c < cols; ++c) a(r, c) = sw * (z[static_cast<std::size_t>(c)] - zl);
      b(r) = sw * ((f[static_cast<std::size_t>(r) + 2] - f0) - zl * total);
    }
    const Eigen::VectorXd sol = a.completeOrthogonalDecomposition().solve(b);
    double rest = total;
    for (std::size_t j = 0; j + 1 < m; ++j) {
      phi[j] = sol(static_cast<Eigen::Index>(j));
      rest -= phi[j];
    }
    phi[m - 1] = rest;
  }

  Tensor out(x.shape());
  for (std::size_t j = 0; j < m; ++j) {
    const float v = static_cast<float>(phi[j] / static_cast<double>(groups[j].size()));
    for (std::uint32_t i : groups[j]) out[i] = v;
  }
  return out;
}

Tensor attribute(Method method, const DifferentiableModel& model, const Tensor& x, std::size_t target,
                 const MethodOptions& options) {
  switch (method) {
    case Method::input_x_gradient: return input_x_gradient(model, x, target);
    case Method::integrated_gradients: return integrated_gradients(model, x, target, options.ig_steps);
    case Method::gradient_shap: return gradient_shap(model, x, target, options.gradient_shap);
    case Method::guided_backprop: return guided_backprop(model, x, target);
    case Method::guided_gradcam: return guided_gradcam(model, x, target, options.gradcam_layer);
    case Method::kernel_shap: return kernel_shap(model, x, target, options.kernel_shap);
  }
  throw ValidationError("unknown attribution method");
}

void write_map(const AttributionMap& map, const std::filesystem::path& path) {
  io::write_volume(io::Volume::from_values(map.header, map.values), path);
  std::string meta = "method=" + to_string(map.method) + "\n";
  meta += "target=" + std::to_string(map.target) + "\n";
  meta += "subject=" + map.subject + "\n";
  util::write_text(path.string() + ".meta", meta);
}

AttributionMap read_map(const std::filesystem::path& path) {
  const io::Volume v = io::read_volume(path);
  AttributionMap map;
  map.header = v.header;
  map.values = v.voxels;
  std::istringstream in(util::read_text(path.string() + ".meta"));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "method") map.method = parse_method(value);
    else if (key == "target") map.target = static_cast<std::size_t>(std::stoul(value));
    else if (key == "subject") map.subject = value;
  }
  return map;
}

GlobalizationResult globalize(const std::vector<MethodMaps>& cohort, std::size_t n_components) {
  std::size_t total = 0, width = 0;
  for (const MethodMaps& mm : cohort) {
    if (mm.maps.empty()) throw ValidationError("method " + to_string(mm.method) + " has no maps");
    for (const auto& map : mm.maps) {
      if (width == 0) width = map.size();
      if (map.size() != width || width == 0) throw ShapeError("globalize: maps differ in size");
      ++total;
    }
  }
  if (total < 4) throw ValidationError("globalize needs at least 4 maps, got " + std::to_string(total));
  if (n_components < 1) throw ValidationError("globalize needs at least one component");

  GlobalizationResult r;
  io::RowMatrix pooled(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(width));
  Eigen::Index row = 0;
  for (const MethodMaps& mm : cohort) {
    std::vector<double> acc(width, 0.0);
    for (const auto& map : mm.maps) {
      const std::vector<float> norm = io::minmax_normalize(map);
      std::copy(norm.begin(), norm.end(), pooled.row(row++).data());
      for (std::size_t i = 0; i < width; ++i) acc[i] += norm[i];
    }
    std::vector<float> mean(width);
    for (std::size_t i = 0; i < width; ++i) mean[i] = static_cast<float>(acc[i] / static_cast<double>(mm.maps.size()));
    r.methods.push_back(mm.method);
    r.method_means.push_back(std::move(mean));
    r.weights.push_back(std::max(mm.faithfulness, 0.0));
  }

  const std::size_t k = std::min({n_components, total - 1, width});
  const latent::PCABasis basis = latent::fit_pca(pooled, k);
  r.components = basis.components;
  r.explained_variance_ratio = basis.explained_variance_ratio;
  r.scores = latent::project(pooled, basis).scores;
  for (std::size_t i = 0; i < k; ++i) r.normalized.push_back(io::minmax_normalize(basis.component(i)));

  const double wsum = std::accumulate(r.weights.begin(), r.weights.end(), 0.0);
  for (double& w : r.weights) w = wsum > 0.0 ? w / wsum : 1.0 / static_cast<double>(r.weights.size());
  std::vector<double> avg(width, 0.0);
  for (std::size_t m = 0; m < r.methods.size(); ++m) {
    for (std::size_t i = 0; i < width; ++i) avg[i] += r.weights[m] * r.method_means[m][i];
  }
  r.weighted_average.assign(avg.begin(), avg.end());
  return r;
}

}  // namespace survxai::attribution
