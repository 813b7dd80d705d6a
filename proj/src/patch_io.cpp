#include "advpatch/patch_io.hpp"

namespace advpatch {
namespace {

void put_values(ByteWriter& w, const Tensor& t) {
  for (Eigen::Index i = 0; i < t.values().size(); ++i) w.f64(t.values()[i]);
}

Tensor get_values(ByteReader& r, Shape shape) {
  Values v(static_cast<Eigen::Index>(numel(shape)));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = r.f64();
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

Bytes encode_patch(const Patch& patch) {
  validate(patch);
  const std::size_t side = patch.side();
  ByteWriter w;
  w.raw("APZP");
  w.u32(kPatchFormatVersion);
  w.u32(static_cast<std::uint32_t>(side));
  w.u32(static_cast<std::uint32_t>(patch.channels()));
  put_values(w, patch.latent);

  std::vector<std::uint8_t> bits((side * side + 7) / 8, 0);
  for (std::size_t i = 0; i < side * side; ++i) {
    if (patch.mask[i] == 1.0) bits[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  for (auto b : bits) w.u8(b);

  const auto& camo = patch.camouflage;
  w.u8(static_cast<std::uint8_t>(camo.mode));
  w.f64(camo.epsilon);
  w.f64(camo.lambda);
  if (camo.mode != CamouflageMode::None) put_values(w, camo.reference);

  w.u32(static_cast<std::uint32_t>(patch.target));
  w.u64(patch.provenance.config_hash);
  w.u64(patch.provenance.seed);
  w.u32(patch.provenance.steps);
  w.u32(static_cast<std::uint32_t>(patch.provenance.models.size()));
  for (const auto& m : patch.provenance.models) w.str(m);
  return w.take();
}

Patch decode_patch(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4 || r.raw(4) != "APZP") throw FormatError("patch file: bad magic", 0);
  const auto version_offset = r.offset();
  if (r.u32() != kPatchFormatVersion) throw FormatError("patch file: unsupported version", version_offset);
  const auto dims_offset = r.offset();
  const std::size_t side = r.u32();
  const std::size_t channels = r.u32();
  if (side == 0 || channels == 0 || side > 4096 || channels > 16) {
    throw FormatError("patch file: implausible canvas dimensions", dims_offset);
  }

  Patch patch;
  patch.latent = get_values(r, {channels, side, side});
  Values mask(static_cast<Eigen::Index>(side * side));
  const std::string bits = r.raw((side * side + 7) / 8);
  for (std::size_t i = 0; i < side * side; ++i) {
    mask[static_cast<Eigen::Index>(i)] = (static_cast<std::uint8_t>(bits[i / 8]) & (0x80u >> (i % 8))) ? 1.0 : 0.0;
  }
  patch.mask = Tensor({side, side}, std::move(mask));

  const auto mode_offset = r.offset();
  const auto mode = r.u8();
  if (mode > 2) throw FormatError("patch file: unknown camouflage mode", mode_offset);
  patch.camouflage.mode = static_cast<CamouflageMode>(mode);
  patch.camouflage.epsilon = r.f64();
  patch.camouflage.lambda = r.f64();
  if (patch.camouflage.mode != CamouflageMode::None) patch.camouflage.reference = get_values(r, {channels, side, side});

  patch.target = r.u32();
  patch.provenance.config_hash = r.u64();
  patch.provenance.seed = r.u64();
  patch.provenance.steps = r.u32();
  const auto models = r.u32();
  for (std::uint32_t i = 0; i < models; ++i) patch.provenance.models.push_back(r.str());
  if (!r.at_end()) throw FormatError("patch file: trailing bytes", r.offset());
  try {
    validate(patch);
  } catch (const Error& e) {
    throw FormatError(std::string("patch file: ") + e.what(), 0);
  }
  return patch;
}

void save_patch(const Patch& patch, const std::filesystem::path& path) { write_file_atomic(path, encode_patch(patch)); }

Patch load_patch(const std::filesystem::path& path) { return decode_patch(read_file(path)); }

}  // namespace advpatch
