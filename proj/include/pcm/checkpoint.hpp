#pragma once

// Binary persistence. All integers and floats are little-endian.
//
// Model checkpoint ("PCMW", version 1):
//   magic[4] u32 version u32 n u32 T u32 embed_freqs u32 layer_count
//   layer_count x { u32 in u32 out u32 activation }
//   per layer: W (out*in f64, row-major), b (out f64)
//   alpha(0..T) ((T+1) f64)
//
// LoRA adapter ("PCML", version 1):
//   magic[4] u32 version u64 base_checksum u32 layer_count
//   layer_count x { u32 rank u32 in u32 out }
//   per layer: A (rank*in f64), B (out*rank f64)
//
// Trajectory dataset ("PCTD", version 1):
//   magic[4] u32 version u32 N u32 T u32 K u32 n u32 solver u64 base_checksum
//   N x { u64 seed, x0 (n f64), history ((K+1)*(T+1)*n f64) }

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pcm/denoiser.hpp"
#include "pcm/lora.hpp"
#include "pcm/pct.hpp"

namespace pcm {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint32_t kFormatVersion = 1;

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

Bytes serialize(const DenoiserParams& params);
DenoiserParams deserialize_denoiser(std::span<const std::uint8_t> bytes);
/// Checksum of the serialized checkpoint; ties datasets and adapters to a base.
std::uint64_t checksum(const DenoiserParams& params);

Bytes serialize(const LoraAdapter& adapter, std::uint64_t base_checksum);
/// Returns the adapter and the base checksum stored with it.
std::pair<LoraAdapter, std::uint64_t> deserialize_lora(std::span<const std::uint8_t> bytes);

Bytes serialize(const TrajectoryDataset& data);
TrajectoryDataset deserialize_dataset(std::span<const std::uint8_t> bytes);

/// IoError when the file cannot be opened, read or written.
Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

void save_checkpoint(const DenoiserParams& params, const std::filesystem::path& path);
DenoiserParams load_checkpoint(const std::filesystem::path& path);

void save_lora(const LoraAdapter& adapter, std::uint64_t base_checksum,
               const std::filesystem::path& path);
/// FormatError if the adapter was trained against a different base.
LoraAdapter load_lora(const std::filesystem::path& path, const DenoiserParams& base);

void save_dataset(const TrajectoryDataset& data, const std::filesystem::path& path);
TrajectoryDataset load_dataset(const std::filesystem::path& path);

}  // namespace pcm
