#pragma once

#include <filesystem>
#include <span>

#include "advpatch/binary_io.hpp"
#include "advpatch/classifier.hpp"

namespace advpatch {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Layout (little-endian):
//   "APZM" | u32 version | u32 len + name
//   u32 C, H, W | u32 classes | u32 layer count | per layer: u32 tag + fields
//     tag 1 conv (filters, kernel, stride, pad), 2 pool (window, stride),
//     3 relu, 4 dense (width)
//   u32 tensor count | per tensor: u32 rank, u32 extents, f64 values
//   u64 seed | u32 epochs | f64 test accuracy | u64 config hash
Bytes encode_model(const Classifier& model);
Classifier decode_model(std::span<const std::uint8_t> bytes);

void save_model(const Classifier& model, const std::filesystem::path& path);
Classifier load_model(const std::filesystem::path& path);

}  // namespace advpatch
