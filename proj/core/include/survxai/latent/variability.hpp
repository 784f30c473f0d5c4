#pragma once

#include <optional>
#include <vector>

#include "survxai/io/volume.hpp"
#include "survxai/latent/pca.hpp"

namespace survxai::latent {

enum class MapKind { euclidean, cosine };

struct VariabilityMap {
  io::VolumeHeader header;
  std::vector<float> values;
  MapKind kind = MapKind::euclidean;
  std::size_t degenerate_voxels = 0;  // cosine only: zero-norm voxels reported as 0

  io::Volume as_volume() const { return io::Volume::from_values(header, values); }
};

// Voxel-wise representation of a subgroup in a K-component basis: coordinate i at
// voxel v is components(i, v) * mean_scores[i].
//
// d_E(v) = sqrt(sum_i (p_A,i(v) - p_B,i(v))^2)
VariabilityMap euclidean_map(const ProjectedSubgroup& a, const ProjectedSubgroup& b, const PCABasis& basis,
                             const io::VolumeHeader& header);

// S_cos(v) = p_A(v).p_B(v) / (|p_A(v)| |p_B(v)|); zero-norm voxels -> 0 and counted.
VariabilityMap cosine_map(const ProjectedSubgroup& a, const ProjectedSubgroup& b, const PCABasis& basis,
                          const io::VolumeHeader& header);

// Euclidean map on the first component. Without a basis, one is fitted on pre + post.
VariabilityMap first_component_group_comparison(const CohortMatrix& pre, const CohortMatrix& post,
                                                const std::optional<PCABasis>& basis = std::nullopt);

struct GlobalVariability {
  VariabilityMap magnitude;    // euclidean over all k components
  VariabilityMap orientation;  // cosine over all k components
};

GlobalVariability global_variability(const CohortMatrix& pre, const CohortMatrix& post, const PCABasis& basis);

}  // namespace survxai::latent
