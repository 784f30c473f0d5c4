#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace survxai::util {

// Shortest round-trippable-enough decimal form used in every CSV the library writes.
std::string fmt_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Joins cells with commas and a trailing newline.
std::string csv_row(const std::vector<std::string>& cells);

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;

// 64-bit FNV-1a; chain calls by passing the previous hash as `h`.
std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = kFnvOffset);

}  // namespace survxai::util
