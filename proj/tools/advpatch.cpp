// advpatch: train classifier zoos and adversarial patches, evaluate them, and
// export the results. Artifacts land in <out>/models, <out>/patches and
// <out>/reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advpatch/attack.hpp"
#include "advpatch/binary_io.hpp"
#include "advpatch/config.hpp"
#include "advpatch/evaluation.hpp"
#include "advpatch/gradcheck.hpp"
#include "advpatch/model_io.hpp"
#include "advpatch/patch_io.hpp"
#include "advpatch/png_io.hpp"
#include "advpatch/report.hpp"

namespace fs = std::filesystem;
using namespace advpatch;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> models;
  std::string patch;
  std::optional<double> scale;
};

struct Run {
  RunConfig config;
  std::uint64_t hash = 0;
  fs::path out;

  fs::path models_dir() const { return out / "models"; }
  fs::path patches_dir() const { return out / "patches"; }
  fs::path reports_dir() const { return out / "reports"; }
};

Run prepare(const Options& opts) {
  Run run;
  if (!opts.config_path.empty()) run.config = load_config(opts.config_path);
  if (opts.seed) run.config.seed = *opts.seed;
  if (opts.out) run.config.out = *opts.out;
  if (opts.scale) {
    if (!(*opts.scale > 0.0 && *opts.scale <= 1.0)) throw ConfigError("--scale must lie in (0, 1]");
    run.config.scale = *opts.scale;
    run.config.scales = {*opts.scale};
  }
  validate(run.config);
  run.hash = config_hash(run.config);
  run.out = run.config.out;
  return run;
}

void announce(const fs::path& path, const std::string& detail) {
  std::cout << "wrote " << path.string() << " (" << detail << ")\n";
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<Classifier> train_zoo(const Run& run, const Dataset& data) {
  const auto archs = configured_architectures(run.config, data.image_shape(), data.classes());
  std::vector<Classifier> zoo;
  for (std::size_t i = 0; i < archs.size(); ++i) {
    const auto options = zoo_train_options(run.config, i + 1);
    auto result = train(init_weights(archs[i], options.seed), data, options);
    result.model.info.config_hash = run.hash;
    const fs::path path = run.models_dir() / (archs[i].name + ".apzm");
    save_model(result.model, path);
    announce(path, archs[i].name + ", test accuracy " + fixed(result.model.info.test_accuracy) + ", seed " +
                       std::to_string(result.model.info.seed));
    zoo.push_back(std::move(result.model));
  }
  return zoo;
}

std::vector<Classifier> load_zoo(const Run& run, const Options& opts) {
  std::vector<fs::path> paths;
  if (!opts.models.empty()) {
    paths.assign(opts.models.begin(), opts.models.end());
  } else {
    for (const auto& name : run.config.models) paths.push_back(run.models_dir() / (name + ".apzm"));
  }
  std::vector<Classifier> zoo;
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw ConfigError("model file not found: " + p.string() + " (run train-model first)");
    zoo.push_back(load_model(p));
  }
  return zoo;
}

void write_reports(const Run& run, const std::vector<EvalReport>& reports, const std::string& stem) {
  const fs::path csv = run.reports_dir() / (stem + ".csv");
  const fs::path svg = run.reports_dir() / (stem + ".svg");
  write_file_atomic(csv, reports_to_csv(reports, run.hash));
  write_file_atomic(svg, reports_to_svg(reports, run.hash));
  for (const auto& r : reports) {
    std::string detail = protocol_name(r.protocol);
    for (const auto& e : r.entries) detail += ", s=" + fixed(e.scale, 2) + " rate " + fixed(e.rate);
    std::cout << "report " << detail << "\n";
  }
  announce(csv, std::to_string(reports.size()) + " protocols, config " + hex64(run.hash));
  announce(svg, "rate vs. scale chart");
}

void save_patch_artifact(const Patch& patch, const fs::path& path) {
  save_patch(patch, path);
  std::string trained_on;
  for (const auto& m : patch.provenance.models) trained_on += (trained_on.empty() ? "" : "+") + m;
  announce(path, "target " + std::to_string(patch.target) + ", " + std::to_string(patch.provenance.steps) +
                     " steps on " + trained_on);
}

int cmd_train_model(const Options& opts) {
  const Run run = prepare(opts);
  train_zoo(run, load_dataset(run.config));
  return 0;
}

int cmd_train_patch(const Options& opts) {
  const Run run = prepare(opts);
  const Dataset data = load_dataset(run.config);
  const auto zoo = load_zoo(run, opts);
  std::vector<Classifier> models;
  std::string stem;
  for (auto position : run.config.train_models) {
    if (position > zoo.size()) throw ConfigError("attack.train_models refers to zoo position " + std::to_string(position));
    models.push_back(zoo[position - 1]);
    stem += (stem.empty() ? "" : "+") + zoo[position - 1].name();
  }
  Patch init = make_patch(data.image_shape().channels, configured_mask(run.config), run.config.target);
  init.camouflage = configured_camouflage(run.config, data.image_shape().channels);
  start_from_reference(init);
  const auto result =
      train_patch(attack_config(run.config), models, transform_distribution(run.config), data, std::move(init));
  save_patch_artifact(result.patch, run.patches_dir() / ("patch-" + stem + ".apzp"));
  const std::size_t tail = std::max<std::size_t>(1, result.objective.size() / 10);
  double last = 0.0;
  for (std::size_t i = result.objective.size() - std::min(tail, result.objective.size()); i < result.objective.size(); ++i) {
    last += result.objective[i] / static_cast<double>(tail);
  }
  if (!result.objective.empty()) std::cout << "objective (final 10% mean) " << fixed(last) << "\n";
  return 0;
}

int cmd_eval(const Options& opts) {
  const Run run = prepare(opts);
  const Dataset data = load_dataset(run.config);
  const auto zoo = load_zoo(run, opts);
  std::optional<Patch> patch;
  if (!opts.patch.empty()) patch = load_patch(opts.patch);
  const auto settings = eval_settings(run.config);
  const Tensor mask = configured_mask(run.config);

  std::vector<EvalReport> reports;
  for (const auto& name : run.config.protocols) {
    const auto kind = parse_protocol(name);
    const Protocol protocol = make_protocol(kind, zoo.size());
    PatchCanvas canvas;
    if (kind == ProtocolKind::Control) {
      canvas = control_patch_from_exemplar(data, settings.target, mask.dim(0),
                                           child_seed(settings.seed, static_cast<std::uint64_t>(kind)));
    } else {
      if (!patch) throw ConfigError("protocol " + name + " needs a trained patch (--patch)");
      canvas = canvas_of(*patch);
    }
    EvalReport report = scale_sweep(canvas, protocol, zoo, data, run.config.scales, settings);
    if (kind != ProtocolKind::Control) {
      report.patch_hash = patch_hash(*patch);
      report.optimizer_steps = patch->provenance.steps;
      report.trained_on = patch->provenance.models;
    }
    reports.push_back(std::move(report));
  }
  write_reports(run, reports, "eval");
  return 0;
}

int cmd_sweep(const Options& opts) {
  const Run run = prepare(opts);
  const Dataset data = load_dataset(run.config);
  const auto zoo = train_zoo(run, data);
  const auto runs = run_protocol_suite(zoo, data, suite_options(run.config, data.image_shape().channels));
  std::vector<EvalReport> reports;
  for (const auto& r : runs) {
    if (r.patch) save_patch_artifact(*r.patch, run.patches_dir() / (protocol_name(r.protocol.kind) + ".apzp"));
    reports.push_back(r.report);
  }
  write_reports(run, reports, "sweep");
  return 0;
}

int cmd_export_patch(const Options& opts) {
  if (opts.patch.empty()) throw ConfigError("export-patch needs --patch");
  const Run run = prepare(opts);
  const Patch patch = load_patch(opts.patch);
  const PatchCanvas canvas = canvas_of(patch);
  const PngText text{{"config_hash", hex64(patch.provenance.config_hash)},
                     {"seed", std::to_string(run.config.seed)},
                     {"target", std::to_string(patch.target)}};
  const std::string stem = fs::path(opts.patch).stem().string();
  const fs::path image = run.patches_dir() / (stem + ".png");
  const fs::path mask = run.patches_dir() / (stem + "-mask.png");
  write_png(image, canvas.pixels, text);
  write_png(mask, canvas.mask, text);
  announce(image, std::to_string(patch.side()) + "x" + std::to_string(patch.side()) + " RGB");
  announce(mask, "binary mask");
  return 0;
}

int cmd_gradcheck() {
  bool ok = true;
  double worst = 0.0;
  for (const auto& r : gradcheck_suite()) {
    const bool pass = r.max_rel_error < 1e-5;
    ok = ok && pass;
    worst = std::max(worst, r.max_rel_error);
    std::printf("%-34s max rel. error %.3e %s\n", r.op.c_str(), r.max_rel_error, pass ? "ok" : "FAILED");
  }
  std::printf("gradcheck %s (worst %.3e, tolerance 1e-5)\n", ok ? "passed" : "failed", worst);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial patch training and evaluation"};
  app.require_subcommand(1);
  Options opts;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "Run configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "Override the master seed");
    sub->add_option("--out", opts.out, "Output directory");
  };

  auto* train_model = app.add_subcommand("train-model", "Train the configured classifier zoo");
  common(train_model);
  auto* train_patch_cmd = app.add_subcommand("train-patch", "Train a patch against the configured models");
  common(train_patch_cmd);
  train_patch_cmd->add_option("--model", opts.models, "Model files forming the zoo (default: <out>/models)");
  auto* eval = app.add_subcommand("eval", "Evaluate a patch under the configured protocols");
  common(eval);
  eval->add_option("--model", opts.models, "Model files forming the zoo (default: <out>/models)");
  eval->add_option("--patch", opts.patch, "Patch archive")->check(CLI::ExistingFile);
  eval->add_option("--scale", opts.scale, "Evaluate at this scale only");
  auto* sweep = app.add_subcommand("sweep", "Train the zoo and run every protocol across all scales");
  common(sweep);
  auto* export_patch = app.add_subcommand("export-patch", "Write a patch archive's pixels and mask as PNG");
  common(export_patch);
  export_patch->add_option("--patch", opts.patch, "Patch archive")->check(CLI::ExistingFile)->required();
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_model) return cmd_train_model(opts);
    if (*train_patch_cmd) return cmd_train_patch(opts);
    if (*eval) return cmd_eval(opts);
    if (*sweep) return cmd_sweep(opts);
    if (*export_patch) return cmd_export_patch(opts);
    if (*gradcheck) return cmd_gradcheck();
  } catch (const std::exception& e) {
    std::cerr << "advpatch: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
