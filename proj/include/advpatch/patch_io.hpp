#pragma once

#include <filesystem>
#include <span>

#include "advpatch/binary_io.hpp"
#include "advpatch/patch.hpp"

namespace advpatch {

inline constexpr std::uint32_t kPatchFormatVersion = 1;

// Layout (little-endian):
//   "APZP" | u32 version | u32 P | u32 C
//   f64 latent values [C x P x P]
//   mask bitmap: ceil(P*P / 8) bytes, row-major, most significant bit first
//   camouflage: u8 mode (0 none, 1 hard, 2 soft) | f64 epsilon | f64 lambda |
//               f64 reference [C x P x P] when mode != 0
//   u32 target | u64 config hash | u64 seed | u32 optimizer steps
//   u32 model count | per model: u32 len + name
Bytes encode_patch(const Patch& patch);
Patch decode_patch(std::span<const std::uint8_t> bytes);

void save_patch(const Patch& patch, const std::filesystem::path& path);
Patch load_patch(const std::filesystem::path& path);

}  // namespace advpatch
