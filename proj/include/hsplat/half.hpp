#pragma once

#include <cstdint>

namespace hsplat {

// IEEE-754 binary16 conversion, round-to-nearest-even. Values above the
// binary16 range saturate to signed infinity; NaN stays NaN.
std::uint16_t float_to_half(float value) noexcept;
float half_to_float(std::uint16_t bits) noexcept;

inline float f16_roundtrip(float value) noexcept { return half_to_float(float_to_half(value)); }

// Two halfs per 32-bit word, first element in the low 16 bits.
inline std::uint32_t pack_half2(float lo, float hi) noexcept {
    return static_cast<std::uint32_t>(float_to_half(lo)) |
           (static_cast<std::uint32_t>(float_to_half(hi)) << 16);
}

inline float unpack_half_lo(std::uint32_t word) noexcept {
    return half_to_float(static_cast<std::uint16_t>(word & 0xFFFFu));
}

inline float unpack_half_hi(std::uint32_t word) noexcept {
    return half_to_float(static_cast<std::uint16_t>(word >> 16));
}

}  // namespace hsplat
