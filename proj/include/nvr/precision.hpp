#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace nvr {

enum class Precision : std::uint8_t { kFull32 = 0, kMixed16 = 1 };

std::string to_string(Precision p);
Precision parse_precision(std::string_view text);

/// IEEE binary16 bits for x, round-to-nearest-even. Magnitudes beyond the
/// largest finite half saturate to +-65504 instead of overflowing to inf.
std::uint16_t float_to_half_bits(float x) noexcept;
float half_bits_to_float(std::uint16_t bits) noexcept;

/// x quantized to the nearest binary16 value and widened back.
inline float half_roundtrip(float x) noexcept { return half_bits_to_float(float_to_half_bits(x)); }

void half_roundtrip(std::span<const float> in, std::span<float> out) noexcept;

}  // namespace nvr
