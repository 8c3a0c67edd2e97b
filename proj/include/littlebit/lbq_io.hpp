// SPDX-License-Identifier: Apache-2.0
#pragma once

// LBQ1 quantized-layer files, little-endian:
//   "LBQ1" | u16 version=1 | u16 flags | u32 d_out | u32 d_in | u32 r_primary | u32 r_residual
//   primary payload, then residual payload when flags bit0 is set.
// A payload is U_sign words, V_sign words (row-major, ceil(r/64) u64 per row),
// then h, g, ell in float32, or fp16 when flags bit1 is set.

#include <cstdint>
#include <filesystem>

#include "littlebit/file_util.hpp"
#include "littlebit/layer.hpp"

namespace littlebit {

enum class ScaleFormat : std::uint8_t { Float32, Float16 };

inline constexpr std::uint16_t kLbqVersion = 1;
inline constexpr std::size_t kLbqHeaderBytes = 24;

/// Nearest half-precision value, ties to even, widened back to double.
double round_to_half(double x);
std::uint16_t half_bits(double x);
double half_from_bits(std::uint16_t bits);

/// Copy of `layer` whose scales hold exactly what the file would store.
LittleBitLayer round_scales(const LittleBitLayer& layer, ScaleFormat format);

/// Payload bytes (header excluded) the layer occupies on disk.
std::size_t lbq_payload_bytes(const LittleBitLayer& layer, ScaleFormat format);

struct LoadedLayer {
  LittleBitLayer layer;
  ScaleFormat format = ScaleFormat::Float32;
};

Bytes encode_lbq(const LittleBitLayer& layer, ScaleFormat format = ScaleFormat::Float32);
LoadedLayer decode_lbq(const Bytes& data);

void save_lbq(const LittleBitLayer& layer, const std::filesystem::path& path,
              ScaleFormat format = ScaleFormat::Float32);
LittleBitLayer load_lbq(const std::filesystem::path& path);
LoadedLayer load_lbq_with_format(const std::filesystem::path& path);

}  // namespace littlebit
