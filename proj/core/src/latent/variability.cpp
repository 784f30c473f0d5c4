#include "survxai/latent/variability.hpp"

#include <algorithm>
#include <cmath>

#include "survxai/error.hpp"

namespace survxai::latent {
namespace {

void check_basis(const ProjectedSubgroup& a, const ProjectedSubgroup& b, const PCABasis& basis,
                 const io::VolumeHeader& header) {
  if (a.basis_fingerprint != basis.fingerprint || b.basis_fingerprint != basis.fingerprint) {
    throw ValidationError("subgroups were projected onto a different basis");
  }
  if (a.mean_scores.size() != basis.k() || b.mean_scores.size() != basis.k()) {
    throw ValidationError("subgroup score width does not match basis");
  }
  if (header.voxel_count() != basis.voxels()) throw ShapeError("map header does not match basis voxel count");
}

}  // namespace

VariabilityMap euclidean_map(const ProjectedSubgroup& a, const ProjectedSubgroup& b, const PCABasis& basis,
                             const io::VolumeHeader& header) {
  check_basis(a, b, basis, header);
  VariabilityMap m;
  m.header = header;
  m.header.dtype = io::DType::f32;
  m.kind = MapKind::euclidean;
  m.values.assign(basis.voxels(), 0.0f);
  for (std::size_t v = 0; v < basis.voxels(); ++v) {
    double acc = 0.0;
    for (std::size_t i = 0; i < basis.k(); ++i) {
      const double loading = basis.components(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v));
      const double d = loading * (a.mean_scores[i] - b.mean_scores[i]);
      acc += d * d;
    }
    m.values[v] = static_cast<float>(std::sqrt(acc));
  }
  return m;
}

VariabilityMap cosine_map(const ProjectedSubgroup& a, const ProjectedSubgroup& b, const PCABasis& basis,
                          const io::VolumeHeader& header) {
  check_basis(a, b, basis, header);
  VariabilityMap m;
  m.header = header;
  m.header.dtype = io::DType::f32;
  m.kind = MapKind::cosine;
  m.values.assign(basis.voxels(), 0.0f);
  for (std::size_t v = 0; v < basis.voxels(); ++v) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < basis.k(); ++i) {
      const double loading = basis.components(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(v));
      const double pa = loading * a.mean_scores[i];
      const double pb = loading * b.mean_scores[i];
      dot += pa * pb;
      na += pa * pa;
      nb += pb * pb;
    }
    if (na <= 0.0 || nb <= 0.0) {
      ++m.degenerate_voxels;
      continue;
    }
    m.values[v] = static_cast<float>(std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0));
  }
  return m;
}

VariabilityMap first_component_group_comparison(const CohortMatrix& pre, const CohortMatrix& post,
                                                const std::optional<PCABasis>& basis) {
  if (!pre.header.same_grid(post.header)) throw ShapeError("pre and post cohorts are on different grids");
  const PCABasis first = basis ? basis->truncated(1) : fit_pca(CohortMatrix::concat(pre, post), 1);
  return euclidean_map(project(pre, first), project(post, first), first, pre.header);
}

GlobalVariability global_variability(const CohortMatrix& pre, const CohortMatrix& post, const PCABasis& basis) {
  if (!pre.header.same_grid(post.header)) throw ShapeError("pre and post cohorts are on different grids");
  const ProjectedSubgroup a = project(pre, basis);
  const ProjectedSubgroup b = project(post, basis);
  return {euclidean_map(a, b, basis, pre.header), cosine_map(a, b, basis, pre.header)};
}

}  // namespace survxai::latent
