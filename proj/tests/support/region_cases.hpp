#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "survxai/latent/regions.hpp"

namespace survxai::testing {

struct RegionCase {
  io::Atlas atlas;
  latent::VariabilityMap map;
};

// Flat 1 x 1 x n atlas, label i + 1 spanning sizes[i] voxels in order.
inline RegionCase region_case(const std::vector<std::size_t>& sizes, std::vector<float> values, latent::MapKind kind) {
  RegionCase c;
  const auto n = static_cast<std::uint32_t>(values.size());
  c.atlas.header.dims = {1, 1, n};
  c.atlas.header.dtype = io::DType::i32;
  for (std::size_t r = 0; r < sizes.size(); ++r) {
    c.atlas.label_table[static_cast<std::int32_t>(r + 1)] = "region" + std::to_string(r + 1);
    c.atlas.labels.insert(c.atlas.labels.end(), sizes[r], static_cast<std::int32_t>(r + 1));
  }
  c.map.header.dims = {1, 1, n};
  c.map.values = std::move(values);
  c.map.kind = kind;
  return c;
}

// Expected selection per region, computed from the selection rules alone.
inline std::vector<bool> oracle_euclidean(const RegionCase& c) {
  std::vector<double> all(c.map.values.begin(), c.map.values.end());
  const double p95 = percentile_oracle(all, 95.0), p80 = percentile_oracle(all, 80.0);
  std::vector<bool> out;
  for (const auto& [label, name] : c.atlas.label_table) {
    double mx = -1e300;
    std::size_t n = 0, above = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (c.atlas.labels[i] != label) continue;
      ++n;
      mx = std::max(mx, all[i]);
      if (all[i] > p80) ++above;
    }
    out.push_back(n > 0 && mx > p95 && 2 * above >= n);
  }
  return out;
}

inline std::vector<bool> oracle_cosine(const RegionCase& c) {
  std::vector<double> all(c.map.values.begin(), c.map.values.end());
  const double p5 = percentile_oracle(all, 5.0);
  std::vector<double> sizes;
  for (const auto& [label, name] : c.atlas.label_table)
    sizes.push_back(static_cast<double>(std::count(c.atlas.labels.begin(), c.atlas.labels.end(), label)));
  const double size_cut = percentile_oracle(sizes, 20.0);
  std::vector<bool> out;
  for (const auto& [label, name] : c.atlas.label_table) {
    double mn = 1e300;
    double n = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (c.atlas.labels[i] != label) continue;
      ++n;
      mn = std::min(mn, all[i]);
    }
    out.push_back(n > 0 && mn < p5 && n >= size_cut);
  }
  return out;
}

inline std::vector<bool> selections(const latent::RegionReport& r) {
  std::vector<bool> out;
  for (const auto& row : r.rows) out.push_back(row.selected);
  return out;
}

// Seeded two-region cases: region sizes, value ranges and overlap vary.
inline RegionCase random_two_region_case(std::uint64_t seed, latent::MapKind kind) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> size(2, 60);
  const std::size_t a = size(rng), b = size(rng);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const float shift = u(rng) * 1.5f - 0.75f;
  const float lo = kind == latent::MapKind::cosine ? -1.0f : 0.0f;
  std::vector<float> values;
  for (std::size_t i = 0; i < a; ++i) values.push_back(lo + u(rng));
  for (std::size_t i = 0; i < b; ++i) values.push_back(lo + u(rng) + shift);
  return region_case({a, b}, std::move(values), kind);
}

}  // namespace survxai::testing
