#pragma once

#include <cstdint>
#include <vector>

#include "survxai/io/cohort.hpp"

namespace survxai::latent {

using io::CohortMatrix;
using io::RowMatrix;

// Top principal directions of a cohort. Rows of `components` are orthonormal;
// each row's largest-magnitude entry is positive.
struct PCABasis {
  std::vector<float> mean;          // per voxel
  RowMatrix components;             // K x voxels
  std::vector<double> explained_variance_ratio;  // K, non-increasing
  std::vector<double> singular_values;           // K
  std::uint64_t fingerprint = 0;    // identifies this exact basis

  std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t voxels() const { return static_cast<std::size_t>(components.cols()); }

  // The first k components of this basis.
  PCABasis truncated(std::size_t k) const;
  std::vector<float> component(std::size_t i) const;
};

// Exact top-k right singular vectors of the row-centred matrix (thin SVD; the
// voxels x voxels covariance is never formed). Requires 1 <= k <= min(rows-1, cols).
PCABasis fit_pca(const RowMatrix& data, std::size_t k);
PCABasis fit_pca(const CohortMatrix& m, std::size_t k);

// Explained-variance ratios of every component the data supports (min(rows-1, cols)).
std::vector<double> explained_variance_spectrum(const RowMatrix& data);

// Smallest k whose cumulative explained variance exceeds `threshold`, capped at rows-1.
std::size_t select_k_by_variance(const CohortMatrix& m, double threshold = 0.8);
std::size_t select_k_from_spectrum(const std::vector<double>& ratios, double threshold);

// Per-subject scores in a basis plus their mean.
struct ProjectedSubgroup {
  RowMatrix scores;                 // subjects x K
  std::vector<double> mean_scores;  // K
  std::uint64_t basis_fingerprint = 0;
};

ProjectedSubgroup project(const CohortMatrix& m, const PCABasis& basis);
ProjectedSubgroup project(const RowMatrix& data, const PCABasis& basis);

// mean + scores * components, for each row of scores.
RowMatrix reconstruct(const RowMatrix& scores, const PCABasis& basis);

}  // namespace survxai::latent
