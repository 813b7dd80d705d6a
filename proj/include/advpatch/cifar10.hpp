#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "advpatch/dataset.hpp"

namespace advpatch {

inline constexpr std::size_t kCifarRecordBytes = 3073;
inline constexpr std::size_t kCifarRecordsPerBatch = 10000;

struct CifarRecords {
  Values pixels;  // records x 3072, channel-planar, scaled by 1/255
  std::vector<std::uint8_t> labels;
};

/// Parses whole 3073-byte records (label byte, then R, G, B planes of 32x32).
/// When `expected_records` is nonzero the byte count must match exactly.
CifarRecords parse_cifar10_records(std::span<const std::uint8_t> bytes, std::size_t expected_records = 0);

/// Loads data_batch_1..5.bin (train) and test_batch.bin (test) from `dir`.
Dataset load_cifar10(const std::filesystem::path& dir);

}  // namespace advpatch
