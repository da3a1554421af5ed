#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "photoread/pi_network.hpp"

namespace photoread {

/// Weight container layout (all integers little-endian), see docs/weights_format.md:
///
///   magic "PRNW" | u32 version | u64 header_bytes | header JSON | f64 tensors | u64 FNV-1a
///
/// The JSON header carries the architecture, standardisation constants, training metadata
/// and the ordered tensor list (name, shape). Tensors are row-major doubles in that order.
inline constexpr std::uint32_t kWeightFormatVersion = 1;

std::vector<std::uint8_t> serialize_weights(const NetworkWeights& weights);

/// Throws ErrorKind::kData on bad magic, unknown version, truncation or checksum mismatch.
NetworkWeights deserialize_weights(std::span<const std::uint8_t> bytes);

/// Writes to a temporary sibling and renames, so readers never see a partial file.
void save_weights(const NetworkWeights& weights, const std::filesystem::path& path);
NetworkWeights load_weights(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

}  // namespace photoread
