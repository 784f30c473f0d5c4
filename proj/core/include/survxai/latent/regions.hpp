#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "survxai/io/volume.hpp"
#include "survxai/latent/variability.hpp"

namespace survxai::latent {

// Linear-interpolation percentile (p in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double p);

struct EuclideanRule {
  double peak_percentile = 95.0;    // some voxel strictly above this
  double extent_percentile = 80.0;  // ...and this fraction of voxels strictly above it
  double extent_fraction = 0.5;
};

struct CosineRule {
  double low_percentile = 5.0;      // some voxel strictly below this
  double size_percentile = 20.0;    // region size at least this percentile of region sizes
};

struct RegionRow {
  std::int32_t label = 0;
  std::string name;
  std::size_t n_voxels = 0;
  double max = 0.0;
  double min = 0.0;
  double frac_above = 0.0;  // fraction strictly above the extent percentile (euclidean rule)
  double frac_below = 0.0;  // fraction strictly below the low percentile (cosine rule)
  bool selected = false;
};

struct RegionReport {
  MapKind kind = MapKind::euclidean;
  double high_cutoff = 0.0;  // euclidean: P95; cosine: P5
  double low_cutoff = 0.0;   // euclidean: P80; cosine: region-size P20
  std::vector<RegionRow> rows;

  std::size_t selected_count() const;
  // region,n_voxels,max,frac_above,selected,min,frac_below
  void write_csv(const std::filesystem::path& path) const;
  std::string to_csv() const;
};

// Percentiles are taken over all non-background atlas voxels.
RegionReport significant_regions_euclidean(const VariabilityMap& map, const io::Atlas& atlas,
                                           const EuclideanRule& rule = {});
RegionReport significant_regions_cosine(const VariabilityMap& map, const io::Atlas& atlas,
                                        const CosineRule& rule = {});

}  // namespace survxai::latent
