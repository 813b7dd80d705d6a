#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "advpatch/attack.hpp"
#include "advpatch/classifier.hpp"
#include "advpatch/dataset.hpp"
#include "advpatch/evaluation.hpp"

namespace advpatch {

/// Everything one experiment run needs. Text form: `key = value` lines under
/// `[section]` headers, `#` comments. Keys written before the first header are
/// resolved by name when the name is unique across sections.
struct RunConfig {
  // [run]
  std::uint64_t seed = 1;
  std::string out = "out";

  // [dataset]
  std::string source = "synthetic";  // synthetic | cifar10
  std::uint64_t synthetic_seed = 17;
  std::size_t train_count = 6000;
  std::size_t test_count = 1000;
  std::string cifar_dir;

  // [zoo]
  std::vector<std::string> models{"conv3", "conv5", "stride2", "deep4", "wide3"};
  std::size_t epochs = 8;
  std::size_t batch_size = 32;
  double learning_rate = 0.03;
  double momentum = 0.9;
  std::string lr_schedule = "linear";  // linear | constant

  // [attack]
  std::size_t target = 9;
  std::size_t iterations = 2000;
  std::size_t batch = 16;
  double step = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t patch_size = 16;
  std::string mask = "circle";  // circle | square | peace | path to a PNG
  std::vector<std::size_t> train_models{1};  // 1-based zoo positions

  // [transform]
  double rotation_min_deg = -20;
  double rotation_max_deg = 20;
  double scale_min = 0.05;
  double scale_max = 0.3;

  // [camouflage]
  std::string camouflage = "none";  // none | hard | soft
  double epsilon = 0.1;
  double lambda = 0.01;
  std::string reference = "tie-dye";  // tie-dye | path to a PNG

  // [eval]
  double scale = 0.25;
  std::vector<double> scales{0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
  std::size_t trials = 400;
  std::vector<std::string> protocols{"whitebox-single", "whitebox-ensemble", "blackbox", "control"};
  std::optional<double> eval_rotation_min_deg;  // defaults to the training range
  std::optional<double> eval_rotation_max_deg;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text with every key; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

/// Cross-key checks and path existence. Throws ConfigError.
void validate(const RunConfig& config);

/// FNV-1a of the canonical text, excluding the output directory.
std::uint64_t config_hash(const RunConfig& config);

Dataset load_dataset(const RunConfig& config);
std::vector<Architecture> configured_architectures(const RunConfig& config, const ImageShape& input,
                                                   std::size_t classes);
TrainOptions zoo_train_options(const RunConfig& config, std::size_t zoo_position);
AttackConfig attack_config(const RunConfig& config);
TransformDistribution transform_distribution(const RunConfig& config);
EvalSettings eval_settings(const RunConfig& config);
Tensor configured_mask(const RunConfig& config);
Camouflage configured_camouflage(const RunConfig& config, std::size_t channels);
SuiteOptions suite_options(const RunConfig& config, std::size_t channels);

}  // namespace advpatch
