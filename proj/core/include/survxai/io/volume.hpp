#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "survxai/tensor/tensor.hpp"

namespace survxai::io {

enum class DType : std::uint8_t { f32 = 0, i32 = 1 };

struct VolumeHeader {
  std::array<std::uint32_t, 3> dims{1, 1, 1};  // D, H, W
  std::array<float, 3> voxel_size_mm{1.0f, 1.0f, 1.0f};
  DType dtype = DType::f32;

  std::size_t voxel_count() const;
  void validate() const;
  bool same_grid(const VolumeHeader& other) const { return dims == other.dims; }

  friend bool operator==(const VolumeHeader&, const VolumeHeader&) = default;
};

struct Volume {
  VolumeHeader header;
  std::vector<float> voxels;

  static Volume zeros(std::array<std::uint32_t, 3> dims);

  // [1, D, H, W]: the single-channel sample layout the networks consume.
  tensor::Tensor as_sample() const;
  static Volume from_values(const VolumeHeader& header, std::vector<float> values);

  friend bool operator==(const Volume&, const Volume&) = default;
};

// Integer label volume; 0 is background and every other label must be named.
struct Atlas {
  VolumeHeader header;
  std::vector<std::int32_t> labels;
  std::map<std::int32_t, std::string> label_table;

  void validate() const;

  friend bool operator==(const Atlas&, const Atlas&) = default;
};

// Binary layout: "XVOL0001", u32 dims[3], f32 voxel_size[3], u8 dtype, payload.
// All fields little-endian.
inline constexpr char kVolumeMagic[8] = {'X', 'V', 'O', 'L', '0', '0', '0', '1'};
inline constexpr std::size_t kVolumeHeaderBytes = 8 + 12 + 12 + 1;

Volume read_volume(const std::filesystem::path& path);
void write_volume(const Volume& volume, const std::filesystem::path& path);

// Labels go to the XVOL file; the label table to "<path>.labels.csv".
Atlas read_atlas(const std::filesystem::path& path);
void write_atlas(const Atlas& atlas, const std::filesystem::path& path);

// Header decoding from an in-memory buffer; exposed for format tests.
VolumeHeader decode_header(const std::vector<char>& bytes);

}  // namespace survxai::io
