#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "survxai/io/cohort.hpp"
#include "survxai/io/volume.hpp"

namespace survxai::io {

struct Standardized {
  CohortMatrix matrix;
  std::vector<float> mean;  // per voxel
  std::vector<float> std;   // per voxel, population; 0 for constant columns
};

// Per-voxel zero-mean unit-variance scaling over subjects. Needs >= 2 rows.
Standardized zscore_standardize(const CohortMatrix& m);
CohortMatrix destandardize(const Standardized& s);

// Affine map of [min, max] onto [0, 1]; constant input maps to zeros.
std::vector<float> minmax_normalize(std::span<const float> values);
Volume minmax_normalize(const Volume& v);

// Trilinear sample at continuous voxel coordinates (z, y, x); outside -> 0.
float sample_trilinear(std::span<const float> voxels, const std::array<std::uint32_t, 3>& dims,
                       double z, double y, double x);

// Resizes a D*H*W grid to new dims with trilinear interpolation (half-pixel centres).
std::vector<float> resize_trilinear(std::span<const float> voxels, const std::array<std::uint32_t, 3>& from,
                                    const std::array<std::uint32_t, 3>& to);

struct AugmentConfig {
  double max_rotation_deg = 15.0;
  int max_shift_voxels = 20;
  double max_intensity_change = 0.2;
};

struct AugmentParams {
  double rotation_deg = 0.0;  // in the H-W plane, about the grid centre
  int shift_h = 0;
  int shift_w = 0;
  double intensity_factor = 1.0;
};

AugmentParams sample_augment_params(const AugmentConfig& cfg, std::uint64_t seed);
Volume apply_augment(const Volume& v, const AugmentParams& p);
// In-plane rotation, in-plane integer shift (depth axis untouched), global intensity factor.
Volume augment(const Volume& v, std::uint64_t seed, const AugmentConfig& cfg = {});

}  // namespace survxai::io
