#include "advpatch/cifar10.hpp"

#include "advpatch/binary_io.hpp"

namespace advpatch {

CifarRecords parse_cifar10_records(std::span<const std::uint8_t> bytes, std::size_t expected_records) {
  if (expected_records != 0 && bytes.size() != expected_records * kCifarRecordBytes) {
    throw FormatError("CIFAR-10 batch: expected " + std::to_string(expected_records * kCifarRecordBytes) +
                          " bytes, found " + std::to_string(bytes.size()),
                      std::min(bytes.size(), expected_records * kCifarRecordBytes));
  }
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError("CIFAR-10 batch: size " + std::to_string(bytes.size()) + " is not a multiple of " +
                          std::to_string(kCifarRecordBytes),
                      bytes.size() - bytes.size() % kCifarRecordBytes);
  }
  const std::size_t records = bytes.size() / kCifarRecordBytes;
  constexpr std::size_t kPixels = kCifarRecordBytes - 1;
  CifarRecords out;
  out.pixels.resize(static_cast<Eigen::Index>(records * kPixels));
  out.labels.resize(records);
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) throw FormatError("CIFAR-10 batch: label byte out of range", r * kCifarRecordBytes);
    out.labels[r] = rec[0];
    for (std::size_t p = 0; p < kPixels; ++p) {
      out.pixels[static_cast<Eigen::Index>(r * kPixels + p)] = static_cast<double>(rec[1 + p]) / 255.0;
    }
  }
  return out;
}

Dataset load_cifar10(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  files.push_back(dir / "test_batch.bin");

  constexpr auto kPixels = static_cast<Eigen::Index>(kCifarRecordBytes - 1);
  const auto per_file = static_cast<Eigen::Index>(kCifarRecordsPerBatch);
  Values pixels(kPixels * per_file * static_cast<Eigen::Index>(files.size()));
  std::vector<std::uint8_t> labels;
  labels.reserve(kCifarRecordsPerBatch * files.size());
  for (std::size_t f = 0; f < files.size(); ++f) {
    if (!std::filesystem::exists(files[f])) throw DataError("CIFAR-10: missing " + files[f].string());
    auto records = parse_cifar10_records(read_file(files[f]), kCifarRecordsPerBatch);
    pixels.segment(static_cast<Eigen::Index>(f) * per_file * kPixels, per_file * kPixels) = records.pixels;
    labels.insert(labels.end(), records.labels.begin(), records.labels.end());
  }
  return Dataset("cifar10", ImageShape{3, 32, 32}, 10, std::move(pixels), std::move(labels),
                 5 * kCifarRecordsPerBatch);
}

}  // namespace advpatch
