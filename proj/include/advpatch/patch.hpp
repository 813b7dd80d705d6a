#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advpatch/tensor.hpp"
#include "advpatch/transform.hpp"

namespace advpatch {

enum class CamouflageMode : std::uint8_t { None = 0, Hard = 1, Soft = 2 };

/// Hard mode keeps ||pixels - reference||_inf <= epsilon; soft mode subtracts
/// lambda * ||pixels - reference||_2^2 from the objective.
struct Camouflage {
  CamouflageMode mode = CamouflageMode::None;
  Tensor reference;  // [C x P x P] in [0,1]; unused when mode is None
  double epsilon = 0.1;
  double lambda = 0.0;
};

struct PatchProvenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::uint32_t steps = 0;           // optimizer steps taken
  std::vector<std::string> models;  // classifiers the patch was trained against

  bool operator==(const PatchProvenance&) const = default;
};

/// Trainable patch. Pixels are sigmoid(latent), so every latent value maps to
/// a valid image.
struct Patch {
  Tensor latent;  // [C x P x P], unconstrained
  Tensor mask;    // [P x P], binary
  Camouflage camouflage;
  std::size_t target = 0;
  PatchProvenance provenance;

  std::size_t side() const { return mask.dim(0); }
  std::size_t channels() const { return latent.dim(0); }
};

/// Mid-gray patch (zero latent) with the given mask.
Patch make_patch(std::size_t channels, Tensor mask, std::size_t target);

/// Throws ConfigError when shapes disagree, the mask is not binary or is
/// empty, or the camouflage spec is out of range.
void validate(const Patch& patch);

/// sigmoid(latent), differentiable.
Tensor pixels(const Patch& patch);

/// Latent values whose sigmoid reproduces `pixels`, with pixels clamped to
/// [1e-6, 1 - 1e-6] first.
Tensor encode_pixels(const Tensor& pixels);

/// Sets the latent to the encoded camouflage reference.
void start_from_reference(Patch& patch);

/// Hard-mode projection: clips pixels into the epsilon ball around the
/// reference and re-encodes them. No-op for other modes.
void project_camouflage(Patch& patch);

Tensor circle_mask(std::size_t side);
Tensor square_mask(std::size_t side);
/// Ring with a vertical bar and two lower diagonals.
Tensor peace_mask(std::size_t side);

/// Seeded swirl of saturated colors used as a disguise reference.
Tensor tie_dye_pattern(std::size_t channels, std::size_t side, std::uint64_t seed);

/// (1 - m_t) * image + m_t * p_t, where p_t and m_t are the canvas pixels and
/// mask warped by `t` onto the image grid. Differentiable in `canvas`.
Tensor composite(const Tensor& canvas, const Tensor& mask, const Tensor& image, const AffineTransform& t);

/// The patch application operator for one image [C x H x W].
Tensor apply_patch(const Patch& patch, const Tensor& image, const AffineTransform& t);

}  // namespace advpatch
