#pragma once

#include <cstdint>

#include "advpatch/dataset.hpp"

namespace advpatch {

inline constexpr std::size_t kSyntheticClasses = 10;

/// Names of the ten synthetic classes, indexed by label.
const char* synthetic_class_name(std::size_t label);

/// Seeded "shapes" dataset: one colored figure (five shapes x two colors) on a
/// textured background per 32x32 RGB image. Labels cycle 0..9, so both splits
/// are exactly balanced. Counts must be positive multiples of 10 with at least
/// 10 images per class.
Dataset generate_synthetic(std::uint64_t seed, std::size_t train_count, std::size_t test_count);

}  // namespace advpatch
