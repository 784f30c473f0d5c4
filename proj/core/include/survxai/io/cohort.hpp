#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "survxai/io/volume.hpp"

namespace survxai::io {

enum class Stage { pre, post };
enum class Group { longer, shorter };

std::string_view to_string(Stage s);
std::string_view to_string(Group g);
Stage parse_stage(std::string_view s);
Group parse_group(std::string_view s);

// Classifier label: shorter-term survival is the positive class.
inline int class_index(Group g) { return g == Group::shorter ? 1 : 0; }

struct ManifestRecord {
  std::string subject_id;
  Stage stage = Stage::pre;
  Group group = Group::longer;
  std::filesystem::path volume_path;
  std::optional<std::filesystem::path> mask_path;

  std::string key() const;  // "<subject>_<stage>"
};

struct CohortManifest {
  std::vector<ManifestRecord> records;

  // Relative paths are resolved against the manifest's directory; every path must exist.
  static CohortManifest read(const std::filesystem::path& path);
  // Paths are written relative to the manifest's directory when possible.
  void write(const std::filesystem::path& path) const;
  void validate() const;

  std::vector<const ManifestRecord*> select(std::optional<Stage> stage, std::optional<Group> group) const;
};

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RowLabel {
  std::string subject_id;
  Stage stage = Stage::pre;
  Group group = Group::longer;
};

// Subjects x voxels, every row on the common grid of `header`.
struct CohortMatrix {
  VolumeHeader header;
  RowMatrix data;
  std::vector<RowLabel> labels;

  std::size_t rows() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(data.cols()); }

  void validate() const;
  CohortMatrix subset(std::optional<Stage> stage, std::optional<Group> group) const;
  static CohortMatrix stack(const std::vector<Volume>& volumes, std::vector<RowLabel> labels);
  static CohortMatrix concat(const CohortMatrix& a, const CohortMatrix& b);
};

// Loads the volumes (or tumour masks when `masks` is set) named by the records.
CohortMatrix load_cohort(const std::vector<const ManifestRecord*>& records, bool masks = false);

}  // namespace survxai::io
