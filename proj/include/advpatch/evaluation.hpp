#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advpatch/attack.hpp"
#include "advpatch/classifier.hpp"
#include "advpatch/dataset.hpp"
#include "advpatch/patch.hpp"

namespace advpatch {

/// Fixed pixels and binary mask, as applied at evaluation time.
struct PatchCanvas {
  Tensor pixels;  // [C x P x P]
  Tensor mask;    // [P x P]
};

PatchCanvas canvas_of(const Patch& patch);

struct EvalSettings {
  std::size_t target = 9;
  std::size_t trials = 400;
  double rotation_min = -20 * kDegree;
  double rotation_max = 20 * kDegree;
  std::uint64_t seed = 1;
};

struct TrialTally {
  std::string model;
  std::size_t trials = 0;
  std::size_t successes = 0;
  double rate = 0.0;
};

/// Seed of trial `trial` at `scale`; independent of how many scales or trials
/// are evaluated around it.
std::uint64_t trial_seed(std::uint64_t seed, double scale, std::size_t trial);

/// One trial's draw: a test-split sample and a placement at the fixed scale.
struct TrialDraw {
  std::size_t sample;
  AffineTransform transform;
};
TrialDraw draw_trial(const Dataset& data, double scale, const EvalSettings& settings, std::size_t trial);

/// Targeted success rate of one classifier: the fraction of trials whose
/// composited image has argmax class == target.
TrialTally success_rate(const PatchCanvas& canvas, const Classifier& model, const Dataset& data, double scale,
                        const EvalSettings& settings);

enum class ProtocolKind { WhiteboxSingle, WhiteboxEnsemble, Blackbox, Control };

std::string protocol_name(ProtocolKind kind);
ProtocolKind parse_protocol(const std::string& name);

/// Train/eval model sets as zoo indices.
struct Protocol {
  ProtocolKind kind;
  std::vector<std::size_t> train_models;
  std::vector<std::size_t> eval_models;
};

/// Whitebox-single: model 0 / model 0. Ensemble: all / all. Blackbox: all but
/// the last / the last. Control: none / all.
Protocol make_protocol(ProtocolKind kind, std::size_t zoo_size);
void validate(const Protocol& protocol);

struct ScaleEntry {
  double scale = 0.0;
  std::size_t trials = 0;     // per evaluated model
  std::size_t successes = 0;  // summed over evaluated models
  double rate = 0.0;          // mean of the per-model rates
  std::vector<TrialTally> per_model;
};

struct EvalReport {
  ProtocolKind protocol = ProtocolKind::WhiteboxSingle;
  std::size_t target = 0;
  std::uint64_t seed = 0;
  std::uint64_t patch_hash = 0;
  std::uint32_t optimizer_steps = 0;
  std::vector<std::string> trained_on;
  std::vector<ScaleEntry> entries;
};

/// Success rates of one canvas at every scale over the protocol's eval models.
EvalReport scale_sweep(const PatchCanvas& canvas, const Protocol& protocol, std::span<const Classifier> zoo,
                       const Dataset& data, std::span<const double> scales, const EvalSettings& settings);

/// Test-split exemplar of class `target`, chosen by `seed`, bilinearly resampled
/// to side x side and masked with the inscribed circle.
PatchCanvas control_patch_from_exemplar(const Dataset& data, std::size_t target, std::size_t side, std::uint64_t seed);

/// Image [C x H x W] resampled to side x side (pixel-center aligned, edge clamped).
Tensor resample_bilinear(const Tensor& image, std::size_t side);

struct SuiteOptions {
  AttackConfig attack;
  TransformDistribution train_transforms;
  std::size_t patch_side = 16;
  Tensor mask;  // defaults to circle_mask(patch_side) when empty-shaped
  Camouflage camouflage;
  std::vector<double> scales{0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  EvalSettings eval;
  std::vector<ProtocolKind> protocols{ProtocolKind::WhiteboxSingle, ProtocolKind::WhiteboxEnsemble,
                                      ProtocolKind::Blackbox, ProtocolKind::Control};
};

struct ProtocolRun {
  Protocol protocol;
  std::optional<Patch> patch;  // absent for the control
  PatchCanvas canvas;
  EvalReport report;
};

/// Trains one patch per non-control protocol and sweeps every protocol over
/// the configured scales, all driven by the attack and eval seeds.
std::vector<ProtocolRun> run_protocol_suite(std::span<const Classifier> zoo, const Dataset& data,
                                            const SuiteOptions& options,
                                            const StepObserver& observer = {});

/// Stable digest of a patch's latent, mask, and provenance.
std::uint64_t patch_hash(const Patch& patch);
std::uint64_t canvas_hash(const PatchCanvas& canvas);

}  // namespace advpatch
