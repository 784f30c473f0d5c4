#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "survxai/io/cohort.hpp"
#include "survxai/io/volume.hpp"

namespace survxai::pipeline {

struct SyntheticSpec {
  std::size_t n_per_group = 20;
  std::array<std::uint32_t, 3> dims{32, 32, 32};
  std::array<double, 2> lesion_radius{3.0, 5.0};  // voxels, uniform
  double rim_factor = 0.6;       // post-surgery rim intensity multiplier
  double rim_width = 1.5;        // voxels
  double signal_strength = 1.0;  // P(lesion in the group's hemisphere) = (1 + s) / 2
  double noise_std = 0.02;
  std::uint64_t seed = 42;

  void validate() const;
};

struct SubjectTruth {
  std::string subject_id;
  io::Group group = io::Group::longer;
  bool left = false;                    // lesion hemisphere (low W index)
  std::array<double, 3> centre{0, 0, 0};  // D, H, W voxel coordinates
  double radius = 0.0;
};

struct SyntheticCohort {
  io::Atlas atlas;
  std::vector<SubjectTruth> truth;
  std::vector<io::Volume> pre, post, masks;  // indexed like truth
};

// Ellipsoidal phantoms with smooth texture. Pre-surgery volumes carry a bright
// spherical lesion; post-surgery volumes zero it and scale a rim around it.
// Shorter-term survivors get a left-hemisphere lesion with probability
// (1 + s) / 2 and slightly larger lesions.
SyntheticCohort generate(const SyntheticSpec& spec);

// Writes volumes/, masks/, atlas.xvol (+ labels), manifest.csv and ground_truth.json.
io::CohortManifest write_cohort(const SyntheticCohort& cohort, const SyntheticSpec& spec, const std::filesystem::path& dir);

// Left-minus-right mean intensity over the brain mask of one volume.
double hemisphere_contrast(const io::Volume& v, const io::Atlas& atlas);

}  // namespace survxai::pipeline
