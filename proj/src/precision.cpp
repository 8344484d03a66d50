#include "nvr/precision.hpp"

#include <bit>

#include "nvr/errors.hpp"

namespace nvr {

std::string to_string(Precision p) { return p == Precision::kMixed16 ? "mixed16" : "full32"; }

Precision parse_precision(std::string_view text) {
  if (text == "full32") return Precision::kFull32;
  if (text == "mixed16") return Precision::kMixed16;
  throw InputError("unknown precision mode '" + std::string(text) + "'");
}

std::uint16_t float_to_half_bits(float x) noexcept {
  const std::uint32_t f = std::bit_cast<std::uint32_t>(x);
  const auto sign = static_cast<std::uint16_t>((f >> 16) & 0x8000u);
  const std::uint32_t abs = f & 0x7FFFFFFFu;

  if (abs > 0x7F800000u) return static_cast<std::uint16_t>(sign | 0x7E00u);  // NaN
  // 65520 is the midpoint between 65504 and the first overflow value; at and
  // above it RNE would round to inf, so saturate.
  if (abs >= 0x477FF000u) return static_cast<std::uint16_t>(sign | 0x7BFFu);

  const int exp = static_cast<int>(abs >> 23) - 127;
  if (exp >= -14) {
    // normal half: 10 mantissa bits, drop 13
    std::uint32_t mant = abs & 0x007FFFFFu;
    std::uint32_t h = (static_cast<std::uint32_t>(exp + 15) << 10) | (mant >> 13);
    const std::uint32_t rem = mant & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;  // carry may bump exponent, which is correct
    return static_cast<std::uint16_t>(sign | h);
  }
  if (exp < -25) return sign;  // below half of the smallest subnormal
  // subnormal half: value = m * 2^-24
  const std::uint32_t mant = (abs & 0x007FFFFFu) | 0x00800000u;
  const int shift = -exp - 1;  // 14..24 -> bits to drop from the 24-bit significand
  const std::uint32_t drop = static_cast<std::uint32_t>(shift);
  std::uint32_t h = mant >> drop;
  const std::uint32_t rem = mant & ((1u << drop) - 1u);
  const std::uint32_t half = 1u << (drop - 1);
  if (rem > half || (rem == half && (h & 1u))) ++h;
  return static_cast<std::uint16_t>(sign | h);
}

float half_bits_to_float(std::uint16_t bits) noexcept {
  const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  const std::uint32_t exp = (bits >> 10) & 0x1Fu;
  std::uint32_t mant = bits & 0x3FFu;
  std::uint32_t f;
  if (exp == 0) {
    if (mant == 0) {
      f = sign;
    } else {
      int e = -1;
      do {
        ++e;
        mant <<= 1;
      } while ((mant & 0x400u) == 0);
      f = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | ((mant & 0x3FFu) << 13);
    }
  } else if (exp == 0x1F) {
    f = sign | 0x7F800000u | (mant << 13);
  } else {
    f = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(f);
}

void half_roundtrip(std::span<const float> in, std::span<float> out) noexcept {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = half_roundtrip(in[i]);
}

}  // namespace nvr
