#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "advpatch/binary_io.hpp"
#include "advpatch/tensor.hpp"

namespace advpatch {

using PngText = std::vector<std::pair<std::string, std::string>>;

/// 8-bit PNG of a [3 x H x W] (RGB) or [H x W] (gray) image in [0,1]; each
/// value is stored as round(v * 255). `text` becomes tEXt chunks.
Bytes encode_png(const Tensor& image, const PngText& text = {});
void write_png(const std::filesystem::path& path, const Tensor& image, const PngText& text = {});

/// Reads any PNG as [3 x H x W] RGB in [0,1] (alpha composited on black).
Tensor read_png_rgb(const std::filesystem::path& path);

/// Binary [H x W] mask: 1 where luminance exceeds 0.5.
Tensor read_png_mask(const std::filesystem::path& path);

}  // namespace advpatch
