#include "survxai/io/volume.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "survxai/error.hpp"

namespace survxai::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "XVOL I/O assumes a little-endian host");

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Kind::open_failed, "cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

template <typename T>
T load(const std::vector<char>& bytes, std::size_t offset) {
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  return v;
}

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
std::vector<T> read_payload(const std::filesystem::path& path, DType expected, VolumeHeader& header) {
  const std::vector<char> bytes = slurp(path);
  header = decode_header(bytes);
  if (header.dtype != expected) {
    throw IoError(IoError::Kind::parse, path.string() + ": unexpected dtype tag " +
                                            std::to_string(static_cast<int>(header.dtype)));
  }
  const std::size_t n = header.voxel_count();
  const std::size_t payload = bytes.size() - kVolumeHeaderBytes;
  if (payload < n * sizeof(T)) {
    throw IoError(IoError::Kind::truncated, path.string() + ": payload holds " +
                                                std::to_string(payload / sizeof(T)) + " voxels, header needs " +
                                                std::to_string(n));
  }
  if (payload > n * sizeof(T)) {
    throw IoError(IoError::Kind::parse, path.string() + ": " + std::to_string(payload - n * sizeof(T)) +
                                            " trailing bytes after payload");
  }
  std::vector<T> values(n);
  std::memcpy(values.data(), bytes.data() + kVolumeHeaderBytes, n * sizeof(T));
  return values;
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoError::Kind::write_failed, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoError::Kind::write_failed, "short write to " + path.string());
}

std::string encode_header(const VolumeHeader& h) {
  std::string out(kVolumeMagic, sizeof(kVolumeMagic));
  for (std::uint32_t d : h.dims) put(out, d);
  for (float s : h.voxel_size_mm) put(out, s);
  put(out, static_cast<std::uint8_t>(h.dtype));
  return out;
}

std::filesystem::path label_table_path(const std::filesystem::path& path) {
  return path.string() + ".labels.csv";
}

}  // namespace

std::size_t VolumeHeader::voxel_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) {
    if (d == 0) throw IoError(IoError::Kind::dim_overflow, "volume dimension of 0");
    if (n > std::numeric_limits<std::size_t>::max() / d / sizeof(float)) {
      throw IoError(IoError::Kind::dim_overflow, "volume dimensions overflow addressable size");
    }
    n *= d;
  }
  return n;
}

void VolumeHeader::validate() const {
  voxel_count();
  for (float s : voxel_size_mm) {
    if (!(s > 0.0f)) throw ValidationError("voxel sizes must be positive");
  }
}

Volume Volume::zeros(std::array<std::uint32_t, 3> dims) {
  Volume v;
  v.header.dims = dims;
  v.voxels.assign(v.header.voxel_count(), 0.0f);
  return v;
}

tensor::Tensor Volume::as_sample() const {
  return tensor::Tensor({1, header.dims[0], header.dims[1], header.dims[2]}, voxels);
}

Volume Volume::from_values(const VolumeHeader& header, std::vector<float> values) {
  if (values.size() != header.voxel_count()) {
    throw ShapeError("volume needs " + std::to_string(header.voxel_count()) + " values, got " +
                     std::to_string(values.size()));
  }
  Volume v;
  v.header = header;
  v.header.dtype = DType::f32;
  v.voxels = std::move(values);
  return v;
}

void Atlas::validate() const {
  header.validate();
  if (labels.size() != header.voxel_count()) throw ShapeError("atlas label count does not match header");
  for (std::int32_t l : labels) {
    if (l != 0 && !label_table.contains(l)) {
      throw ValidationError("atlas label " + std::to_string(l) + " missing from label table");
    }
  }
}

VolumeHeader decode_header(const std::vector<char>& bytes) {
  if (bytes.size() < sizeof(kVolumeMagic) ||
      std::memcmp(bytes.data(), kVolumeMagic, sizeof(kVolumeMagic)) != 0) {
    throw IoError(IoError::Kind::bad_magic, "not an XVOL0001 file");
  }
  if (bytes.size() < kVolumeHeaderBytes) throw IoError(IoError::Kind::truncated, "truncated XVOL header");
  VolumeHeader h;
  for (std::size_t i = 0; i < 3; ++i) h.dims[i] = load<std::uint32_t>(bytes, 8 + 4 * i);
  for (std::size_t i = 0; i < 3; ++i) h.voxel_size_mm[i] = load<float>(bytes, 20 + 4 * i);
  const auto tag = load<std::uint8_t>(bytes, 32);
  if (tag > 1) throw IoError(IoError::Kind::parse, "unknown dtype tag " + std::to_string(tag));
  h.dtype = static_cast<DType>(tag);
  h.voxel_count();
  for (float s : h.voxel_size_mm) {
    if (!(s > 0.0f)) throw IoError(IoError::Kind::parse, "non-positive voxel size in header");
  }
  return h;
}

Volume read_volume(const std::filesystem::path& path) {
  Volume v;
  v.voxels = read_payload<float>(path, DType::f32, v.header);
  return v;
}

void write_volume(const Volume& volume, const std::filesystem::path& path) {
  VolumeHeader h = volume.header;
  h.dtype = DType::f32;
  h.validate();
  if (volume.voxels.size() != h.voxel_count()) throw ShapeError("volume payload does not match header dims");
  std::string bytes = encode_header(h);
  bytes.append(reinterpret_cast<const char*>(volume.voxels.data()), volume.voxels.size() * sizeof(float));
  write_bytes(path, bytes);
}

Atlas read_atlas(const std::filesystem::path& path) {
  Atlas a;
  a.labels = read_payload<std::int32_t>(path, DType::i32, a.header);
  std::ifstream in(label_table_path(path));
  if (!in) throw IoError(IoError::Kind::open_failed, "cannot open " + label_table_path(path).string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("label,", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(IoError::Kind::parse, "bad label table line: " + line);
    try {
      a.label_table[std::stoi(line.substr(0, comma))] = line.substr(comma + 1);
    } catch (const std::logic_error&) {
      throw IoError(IoError::Kind::parse, "bad label id in line: " + line);
    }
  }
  a.validate();
  return a;
}

void write_atlas(const Atlas& atlas, const std::filesystem::path& path) {
  atlas.validate();
  VolumeHeader h = atlas.header;
  h.dtype = DType::i32;
  std::string bytes = encode_header(h);
  bytes.append(reinterpret_cast<const char*>(atlas.labels.data()), atlas.labels.size() * sizeof(std::int32_t));
  write_bytes(path, bytes);
  std::ostringstream table;
  table << "label,name\n";
  for (const auto& [label, name] : atlas.label_table) table << label << ',' << name << '\n';
  write_bytes(label_table_path(path), table.str());
}

}  // namespace survxai::io
