#include "survxai/io/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "survxai/error.hpp"

namespace survxai::io {

Standardized zscore_standardize(const CohortMatrix& m) {
  if (m.rows() < 2) throw ValidationError("z-scoring needs at least 2 subjects, got " + std::to_string(m.rows()));
  Standardized s;
  s.matrix = m;
  const std::size_t n = m.rows(), p = m.cols();
  s.mean.resize(p);
  s.std.resize(p);
  for (std::size_t c = 0; c < p; ++c) {
    double mu = 0.0;
    for (std::size_t r = 0; r < n; ++r) mu += m.data(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = m.data(r, c) - mu;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    s.mean[c] = static_cast<float>(mu);
    s.std[c] = sd > 0.0 ? static_cast<float>(sd) : 0.0f;
    for (std::size_t r = 0; r < n; ++r) {
      s.matrix.data(r, c) = sd > 0.0 ? static_cast<float>((m.data(r, c) - mu) / sd) : 0.0f;
    }
  }
  return s;
}

CohortMatrix destandardize(const Standardized& s) {
  CohortMatrix out = s.matrix;
  for (std::size_t c = 0; c < out.cols(); ++c)
    for (std::size_t r = 0; r < out.rows(); ++r)
      out.data(r, c) = s.std[c] > 0.0f ? s.matrix.data(r, c) * s.std[c] + s.mean[c] : s.mean[c];
  return out;
}

std::vector<float> minmax_normalize(std::span<const float> values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double mn = *lo, range = static_cast<double>(*hi) - mn;
  std::vector<float> out(values.size(), 0.0f);
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>((values[i] - mn) / range);
  return out;
}

Volume minmax_normalize(const Volume& v) {
  Volume out = v;
  out.voxels = minmax_normalize(v.voxels);
  return out;
}

float sample_trilinear(std::span<const float> voxels, const std::array<std::uint32_t, 3>& dims,
                       double z, double y, double x) {
  const double coords[3] = {z, y, x};
  long base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor(coords[a]);
    base[a] = static_cast<long>(f);
    frac[a] = coords[a] - f;
  }
  auto at = [&](long zz, long yy, long xx) -> double {
    if (zz < 0 || yy < 0 || xx < 0 || zz >= static_cast<long>(dims[0]) || yy >= static_cast<long>(dims[1]) ||
        xx >= static_cast<long>(dims[2])) {
      return 0.0;
    }
    return voxels[(static_cast<std::size_t>(zz) * dims[1] + static_cast<std::size_t>(yy)) * dims[2] +
                  static_cast<std::size_t>(xx)];
  };
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? frac[0] : 1.0 - frac[0];
    if (wz == 0.0) continue;
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? frac[1] : 1.0 - frac[1];
      if (wy == 0.0) continue;
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? frac[2] : 1.0 - frac[2];
        if (wx == 0.0) continue;
        acc += wz * wy * wx * at(base[0] + dz, base[1] + dy, base[2] + dx);
      }
    }
  }
  return static_cast<float>(acc);
}

std::vector<float> resize_trilinear(std::span<const float> voxels, const std::array<std::uint32_t, 3>& from,
                                    const std::array<std::uint32_t, 3>& to) {
  std::vector<float> out(static_cast<std::size_t>(to[0]) * to[1] * to[2]);
  auto src = [&](std::uint32_t i, int a) {
    const double c = (i + 0.5) * static_cast<double>(from[a]) / to[a] - 0.5;
    return std::clamp(c, 0.0, static_cast<double>(from[a] - 1));
  };
  std::size_t o = 0;
  for (std::uint32_t z = 0; z < to[0]; ++z)
    for (std::uint32_t y = 0; y < to[1]; ++y)
      for (std::uint32_t x = 0; x < to[2]; ++x) out[o++] = sample_trilinear(voxels, from, src(z, 0), src(y, 1), src(x, 2));
  return out;
}

AugmentParams sample_augment_params(const AugmentConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AugmentParams p;
  if (cfg.max_rotation_deg > 0.0) {
    p.rotation_deg = std::uniform_real_distribution<double>(-cfg.max_rotation_deg, cfg.max_rotation_deg)(rng);
  }
  if (cfg.max_shift_voxels > 0) {
    std::uniform_int_distribution<int> shift(-cfg.max_shift_voxels, cfg.max_shift_voxels);
    p.shift_h = shift(rng);
    p.shift_w = shift(rng);
  }
  if (cfg.max_intensity_change > 0.0) {
    p.intensity_factor = std::uniform_real_distribution<double>(1.0 - cfg.max_intensity_change,
                                                                1.0 + cfg.max_intensity_change)(rng);
  }
  return p;
}

Volume apply_augment(const Volume& v, const AugmentParams& p) {
  const auto& dims = v.header.dims;
  if (v.voxels.empty()) throw ValidationError("cannot augment an empty volume");
  Volume out = v;
  const double theta = p.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double cy = (dims[1] - 1) / 2.0, cx = (dims[2] - 1) / 2.0;
  std::size_t o = 0;
  for (std::uint32_t z = 0; z < dims[0]; ++z)
    for (std::uint32_t y = 0; y < dims[1]; ++y)
      for (std::uint32_t x = 0; x < dims[2]; ++x, ++o) {
        // Inverse map: undo the shift, then rotate by -theta about the centre.
        const double qy = static_cast<double>(y) - p.shift_h - cy;
        const double qx = static_cast<double>(x) - p.shift_w - cx;
        const double sy = c * qy + s * qx + cy;
        const double sx = -s * qy + c * qx + cx;
        out.voxels[o] = static_cast<float>(sample_trilinear(v.voxels, dims, z, sy, sx) * p.intensity_factor);
      }
  return out;
}

Volume augment(const Volume& v, std::uint64_t seed, const AugmentConfig& cfg) {
  return apply_augment(v, sample_augment_params(cfg, seed));
}

}  // namespace survxai::io
