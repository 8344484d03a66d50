#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "nvr/model.hpp"
#include "nvr/precision.hpp"

namespace nvr {

// .nvrc container. All fields little-endian; see docs/nvrc-format.md.
inline constexpr std::array<char, 4> kNvrcMagic{'N', 'V', 'R', 'C'};
inline constexpr std::uint16_t kNvrcVersion = 1;
inline constexpr std::size_t kNvrcHeaderBytes = 112;
inline constexpr std::uint16_t kFlagMetaInit = 1u << 0;

/// Encoder kind codes stored in the header.
enum class EncoderCode : std::uint32_t { kHash = 0, kIdentity = 1, kFrequency = 2, kTriangle = 3, kOneBlob = 4 };

/// Exact size of the serialized form of `spec` under `mode`.
std::uint64_t serialized_size(const ModelSpec& spec, Precision mode);

/// Canonical byte image of the model. In mixed16 every trainable is stored as
/// its binary16 rounding.
std::vector<std::uint8_t> serialize(const Model& model, Precision mode);
std::vector<std::uint8_t> serialize(const Model& model);  // uses model.precision

/// Throws CodecError (bad magic, unsupported version, CRC mismatch,
/// truncated, malformed). 16-bit payloads come back widened to float.
Model deserialize(std::span<const std::uint8_t> bytes);

/// Writes the file and returns its size in bytes.
std::uint64_t write_model(const std::filesystem::path& path, const Model& model, Precision mode);
Model read_model(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace nvr
