#include "advpatch/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>

#include <png.h>

namespace advpatch {
namespace {

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<Bytes*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

// Everything that can longjmp lives here, away from objects with destructors.
bool write_image(png_structp png, png_infop info, Bytes* out, png_text* chunks, int chunk_count,
                 const std::uint8_t* rows, std::size_t w, std::size_t h, bool rgb) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_write_fn(png, out, append_bytes, nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               rgb ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  if (chunk_count > 0) png_set_text(png, info, chunks, chunk_count);
  png_write_info(png, info);
  const std::size_t stride = w * (rgb ? 3 : 1);
  for (std::size_t i = 0; i < h; ++i) png_write_row(png, rows + i * stride);
  png_write_end(png, nullptr);
  return true;
}

}  // namespace

Bytes encode_png(const Tensor& image, const PngText& text) {
  const bool rgb = image.rank() == 3;
  if (!(rgb && image.dim(0) == 3) && image.rank() != 2) {
    throw ShapeError("encode_png: expected [3 x H x W] or [H x W], got " + to_string(image.shape()));
  }
  const std::size_t h = image.dim(image.rank() - 2), w = image.dim(image.rank() - 1);
  const std::size_t channels = rgb ? 3 : 1;

  std::vector<std::uint8_t> rows(h * w * channels);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      for (std::size_t c = 0; c < channels; ++c) {
        rows[(i * w + j) * channels + c] = to_byte(image[(c * h + i) * w + j]);
      }
    }
  }

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("encode_png: libpng initialisation failed");
  }
  Bytes out;
  std::vector<png_text> chunks(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    std::memset(&chunks[i], 0, sizeof(png_text));
    chunks[i].compression = PNG_TEXT_COMPRESSION_NONE;
    chunks[i].key = const_cast<char*>(text[i].first.c_str());
    chunks[i].text = const_cast<char*>(text[i].second.c_str());
  }
  const bool ok = write_image(png, info, &out, chunks.data(), static_cast<int>(chunks.size()), rows.data(), w, h, rgb);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw DataError("encode_png: libpng error");
  return out;
}

void write_png(const std::filesystem::path& path, const Tensor& image, const PngText& text) {
  write_file_atomic(path, encode_png(image, text));
}

Tensor read_png_rgb(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
  png_color black{0, 0, 0};
  if (!png_image_finish_read(&img, &black, buffer.data(), 0, nullptr)) {
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const std::size_t h = img.height, w = img.width;
  Values v(static_cast<Eigen::Index>(3 * h * w));
  for (std::size_t i = 0; i < h * w; ++i) {
    for (std::size_t c = 0; c < 3; ++c) v[static_cast<Eigen::Index>(c * h * w + i)] = buffer[i * 3 + c] / 255.0;
  }
  png_image_free(&img);
  return Tensor({3, h, w}, std::move(v));
}

Tensor read_png_mask(const std::filesystem::path& path) {
  const Tensor rgb = read_png_rgb(path);
  const std::size_t h = rgb.dim(1), w = rgb.dim(2), plane = h * w;
  Values v(static_cast<Eigen::Index>(plane));
  for (std::size_t i = 0; i < plane; ++i) {
    const double lum = 0.299 * rgb[i] + 0.587 * rgb[plane + i] + 0.114 * rgb[2 * plane + i];
    v[static_cast<Eigen::Index>(i)] = lum > 0.5 ? 1.0 : 0.0;
  }
  return Tensor({h, w}, std::move(v));
}

}  // namespace advpatch
