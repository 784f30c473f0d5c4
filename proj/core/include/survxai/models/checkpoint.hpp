#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "survxai/models/networks.hpp"

namespace survxai::models {

// Layout: "XCKP0001", u64 spec hash, u32 store count; per store a u32 parameter
// count and per parameter (u32 name length, name, u32 rank, u32 dims[rank]);
// then every parameter's f32 values in order. Little-endian throughout.
void write_checkpoint(const std::filesystem::path& path, std::uint64_t spec_hash,
                      const std::vector<const ParamStore*>& stores);
// Fills `stores` in place; names, shapes and the spec hash must match.
void read_checkpoint(const std::filesystem::path& path, std::uint64_t spec_hash,
                     const std::vector<ParamStore*>& stores);

void save(const Autoencoder& model, const std::filesystem::path& path);
Autoencoder load_autoencoder(const AutoencoderSpec& spec, const std::filesystem::path& path);
void save(const Classifier& model, const std::filesystem::path& path);
Classifier load_classifier(const ClassifierSpec& spec, const std::filesystem::path& path);

}  // namespace survxai::models
