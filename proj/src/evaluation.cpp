#include "advpatch/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "advpatch/binary_io.hpp"
#include "advpatch/ops.hpp"
#include "advpatch/patch_io.hpp"
#include "advpatch/rng.hpp"

namespace advpatch {
namespace {

constexpr std::size_t kPredictChunk = 100;

std::vector<Tensor> compose_trials(const PatchCanvas& canvas, const Dataset& data, double scale,
                                   const EvalSettings& settings) {
  std::vector<Tensor> out;
  out.reserve(settings.trials);
  for (std::size_t i = 0; i < settings.trials; ++i) {
    const TrialDraw draw = draw_trial(data, scale, settings, i);
    out.push_back(composite(canvas.pixels, canvas.mask, data.image(draw.sample), draw.transform));
  }
  return out;
}

TrialTally tally(std::span<const Tensor> composed, const Classifier& model, std::size_t target) {
  TrialTally t;
  t.model = model.name();
  t.trials = composed.size();
  for (std::size_t start = 0; start < composed.size(); start += kPredictChunk) {
    const auto chunk = composed.subspan(start, std::min(kPredictChunk, composed.size() - start));
    for (auto predicted : predict_classes(model, stack(chunk))) t.successes += predicted == target;
  }
  t.rate = static_cast<double>(t.successes) / static_cast<double>(t.trials);
  return t;
}

void check_eval_inputs(const PatchCanvas& canvas, const Dataset& data, double scale, const EvalSettings& settings) {
  if (settings.trials < 1) throw ConfigError("evaluation needs at least one trial");
  if (data.test_count() == 0) throw DataError("evaluation: empty test split of dataset '" + data.name() + "'");
  if (canvas.pixels.rank() != 3 || canvas.pixels.dim(0) != data.image_shape().channels) {
    throw ShapeError("evaluation: canvas " + to_string(canvas.pixels.shape()) + " does not match the dataset channels");
  }
  const auto& s = data.image_shape();
  check_feasible(TransformDistribution::fixed_scale(scale, settings.rotation_min, settings.rotation_max), s.height,
                 s.width);
}

}  // namespace

PatchCanvas canvas_of(const Patch& patch) { return {pixels(patch).detach(), patch.mask}; }

std::uint64_t trial_seed(std::uint64_t seed, double scale, std::size_t trial) {
  return child_seed(child_seed(seed, real_key(scale)), trial);
}

TrialDraw draw_trial(const Dataset& data, double scale, const EvalSettings& settings, std::size_t trial) {
  Rng rng(trial_seed(settings.seed, scale, trial));
  TrialDraw draw;
  draw.sample = data.index(Split::Test, uniform_index(rng, data.test_count()));
  const auto& s = data.image_shape();
  draw.transform = sample_transform(TransformDistribution::fixed_scale(scale, settings.rotation_min, settings.rotation_max),
                                    s.height, s.width, rng);
  return draw;
}

TrialTally success_rate(const PatchCanvas& canvas, const Classifier& model, const Dataset& data, double scale,
                        const EvalSettings& settings) {
  check_eval_inputs(canvas, data, scale, settings);
  const auto composed = compose_trials(canvas, data, scale, settings);
  return tally(composed, model, settings.target);
}

std::string protocol_name(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::WhiteboxSingle:
      return "whitebox-single";
    case ProtocolKind::WhiteboxEnsemble:
      return "whitebox-ensemble";
    case ProtocolKind::Blackbox:
      return "blackbox";
    case ProtocolKind::Control:
      return "control";
  }
  return "unknown";
}

ProtocolKind parse_protocol(const std::string& name) {
  for (auto kind : {ProtocolKind::WhiteboxSingle, ProtocolKind::WhiteboxEnsemble, ProtocolKind::Blackbox,
                    ProtocolKind::Control}) {
    if (protocol_name(kind) == name) return kind;
  }
  throw ConfigError("unknown protocol '" + name + "'");
}

Protocol make_protocol(ProtocolKind kind, std::size_t zoo_size) {
  if (zoo_size == 0) throw ConfigError("protocol needs at least one model");
  Protocol p{kind, {}, {}};
  std::vector<std::size_t> all(zoo_size);
  for (std::size_t i = 0; i < zoo_size; ++i) all[i] = i;
  switch (kind) {
    case ProtocolKind::WhiteboxSingle:
      p.train_models = p.eval_models = {0};
      break;
    case ProtocolKind::WhiteboxEnsemble:
      p.train_models = p.eval_models = all;
      break;
    case ProtocolKind::Blackbox:
      if (zoo_size < 2) throw ConfigError("blackbox protocol needs at least two models");
      p.train_models.assign(all.begin(), all.end() - 1);
      p.eval_models = {zoo_size - 1};
      break;
    case ProtocolKind::Control:
      p.eval_models = all;
      break;
  }
  validate(p);
  return p;
}

void validate(const Protocol& p) {
  if (p.eval_models.empty()) throw ConfigError(protocol_name(p.kind) + ": empty eval model set");
  switch (p.kind) {
    case ProtocolKind::Blackbox:
      for (auto m : p.eval_models) {
        if (std::find(p.train_models.begin(), p.train_models.end(), m) != p.train_models.end()) {
          throw ConfigError("blackbox: eval model " + std::to_string(m) + " is also a training model");
        }
      }
      if (p.train_models.empty()) throw ConfigError("blackbox: empty training set");
      break;
    case ProtocolKind::WhiteboxSingle:
    case ProtocolKind::WhiteboxEnsemble:
      if (p.train_models != p.eval_models) throw ConfigError(protocol_name(p.kind) + ": eval set must equal train set");
      break;
    case ProtocolKind::Control:
      if (!p.train_models.empty()) throw ConfigError("control: no training models allowed");
      break;
  }
}

EvalReport scale_sweep(const PatchCanvas& canvas, const Protocol& protocol, std::span<const Classifier> zoo,
                       const Dataset& data, std::span<const double> scales, const EvalSettings& settings) {
  validate(protocol);
  if (scales.empty()) throw ConfigError("scale sweep needs at least one scale");
  for (auto m : protocol.eval_models) {
    if (m >= zoo.size()) throw ConfigError("protocol references model " + std::to_string(m) + " outside the zoo");
  }
  for (double s : scales) check_eval_inputs(canvas, data, s, settings);

  EvalReport report;
  report.protocol = protocol.kind;
  report.target = settings.target;
  report.seed = settings.seed;
  report.patch_hash = canvas_hash(canvas);
  for (auto m : protocol.train_models) report.trained_on.push_back(zoo[m].name());

  for (double s : scales) {
    const auto composed = compose_trials(canvas, data, s, settings);
    ScaleEntry entry;
    entry.scale = s;
    entry.trials = settings.trials;
    double rate_sum = 0.0;
    for (auto m : protocol.eval_models) {
      entry.per_model.push_back(tally(composed, zoo[m], settings.target));
      entry.successes += entry.per_model.back().successes;
      rate_sum += entry.per_model.back().rate;
    }
    entry.rate = rate_sum / static_cast<double>(entry.per_model.size());
    report.entries.push_back(std::move(entry));
  }
  return report;
}

Tensor resample_bilinear(const Tensor& image, std::size_t side) {
  if (image.rank() != 3 || side == 0) throw ShapeError("resample_bilinear: bad input " + to_string(image.shape()));
  const std::size_t channels = image.dim(0), h = image.dim(1), w = image.dim(2);
  Values out(static_cast<Eigen::Index>(channels * side * side));
  const auto& in = image.values();
  auto axis = [side](std::size_t i, std::size_t extent, std::size_t& lo, std::size_t& hi, double& frac) {
    double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(extent) / static_cast<double>(side) - 0.5;
    pos = std::clamp(pos, 0.0, static_cast<double>(extent - 1));
    lo = static_cast<std::size_t>(std::floor(pos));
    hi = std::min(lo + 1, extent - 1);
    frac = pos - static_cast<double>(lo);
  };
  for (std::size_t i = 0; i < side; ++i) {
    std::size_t y0, y1;
    double fy;
    axis(i, h, y0, y1, fy);
    for (std::size_t j = 0; j < side; ++j) {
      std::size_t x0, x1;
      double fx;
      axis(j, w, x0, x1, fx);
      for (std::size_t c = 0; c < channels; ++c) {
        auto at = [&](std::size_t y, std::size_t x) { return in[static_cast<Eigen::Index>((c * h + y) * w + x)]; };
        const double top = fx == 0.0 ? at(y0, x0) : (1 - fx) * at(y0, x0) + fx * at(y0, x1);
        const double bottom = fx == 0.0 ? at(y1, x0) : (1 - fx) * at(y1, x0) + fx * at(y1, x1);
        out[static_cast<Eigen::Index>((c * side + i) * side + j)] = fy == 0.0 ? top : (1 - fy) * top + fy * bottom;
      }
    }
  }
  return Tensor({channels, side, side}, std::move(out));
}

PatchCanvas control_patch_from_exemplar(const Dataset& data, std::size_t target, std::size_t side, std::uint64_t seed) {
  std::vector<std::size_t> candidates;
  for (auto i : data.indices(Split::Test)) {
    if (data.label(i) == target) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw DataError("control exemplar: class " + std::to_string(target) + " absent from the test split");
  }
  Rng rng(seed);
  const std::size_t pick = candidates[uniform_index(rng, candidates.size())];
  return {resample_bilinear(data.image(pick), side), circle_mask(side)};
}

std::vector<ProtocolRun> run_protocol_suite(std::span<const Classifier> zoo, const Dataset& data,
                                            const SuiteOptions& options, const StepObserver& observer) {
  const Tensor mask = options.mask.rank() == 2 ? options.mask : circle_mask(options.patch_side);
  std::vector<ProtocolRun> runs;
  for (auto kind : options.protocols) {
    ProtocolRun run{make_protocol(kind, zoo.size()), std::nullopt, {}, {}};
    if (kind == ProtocolKind::Control) {
      run.canvas = control_patch_from_exemplar(data, options.eval.target, mask.dim(0),
                                               child_seed(options.eval.seed, static_cast<std::uint64_t>(kind)));
    } else {
      std::vector<Classifier> models;
      for (auto m : run.protocol.train_models) models.push_back(zoo[m]);
      Patch init = make_patch(data.image_shape().channels, mask, options.attack.target);
      init.camouflage = options.camouflage;
      start_from_reference(init);
      AttackConfig attack = options.attack;
      attack.seed = child_seed(options.attack.seed, static_cast<std::uint64_t>(kind));
      run.patch = train_patch(attack, models, options.train_transforms, data, std::move(init), observer).patch;
      run.canvas = canvas_of(*run.patch);
    }
    run.report = scale_sweep(run.canvas, run.protocol, zoo, data, options.scales, options.eval);
    if (run.patch) {
      run.report.patch_hash = patch_hash(*run.patch);
      run.report.optimizer_steps = run.patch->provenance.steps;
      run.report.trained_on = run.patch->provenance.models;
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

std::uint64_t patch_hash(const Patch& patch) { return fnv1a64(encode_patch(patch)); }

std::uint64_t canvas_hash(const PatchCanvas& canvas) {
  ByteWriter w;
  for (const Tensor* t : {&canvas.pixels, &canvas.mask}) {
    for (Eigen::Index i = 0; i < t->values().size(); ++i) w.f64(t->values()[i]);
  }
  return fnv1a64(w.bytes());
}

}  // namespace advpatch
