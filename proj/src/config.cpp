#include "advpatch/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "advpatch/binary_io.hpp"
#include "advpatch/cifar10.hpp"
#include "advpatch/png_io.hpp"
#include "advpatch/rng.hpp"
#include "advpatch/synthetic.hpp"

namespace advpatch {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty list element");
    items.push_back(item);
  }
  if (items.empty()) throw ConfigError("empty list");
  return items;
}

template <typename T>
T parse_number(const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) throw ConfigError("'" + text + "' is not a valid number");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw ConfigError("'" + text + "' is not finite");
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Range {
  double lo, hi;
  bool lo_open = false, hi_open = false;

  void check(double v) const {
    const bool ok = (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
    if (!ok) {
      throw ConfigError("value " + format_double(v) + " outside " + (lo_open ? "(" : "[") + format_double(lo) + ", " +
                        format_double(hi) + (hi_open ? ")" : "]"));
    }
  }
};

constexpr double kBig = 1e300;
const Range kAny{-kBig, kBig};
const Range kUnitOpenLow{0, 1, true, false};
const Range kPositive{0, kBig, true, false};
const Range kNonNegative{0, kBig};
const Range kFraction{0, 1, false, true};

struct KeyDef {
  std::string section;
  std::string name;
  std::function<void(RunConfig&, const std::string&)> parse;
  std::function<std::optional<std::string>(const RunConfig&)> format;
};

KeyDef u64_key(std::string section, std::string name, std::uint64_t RunConfig::*field) {
  return {std::move(section), std::move(name),
          [field](RunConfig& c, const std::string& v) { c.*field = parse_number<std::uint64_t>(v); },
          [field](const RunConfig& c) { return std::optional(std::to_string(c.*field)); }};
}

KeyDef size_key(std::string section, std::string name, std::size_t RunConfig::*field, std::size_t min,
                std::size_t max = SIZE_MAX) {
  return {std::move(section), std::move(name),
          [field, min, max](RunConfig& c, const std::string& v) {
            const auto n = parse_number<std::size_t>(v);
            if (n < min || n > max) {
              throw ConfigError("value " + v + " outside [" + std::to_string(min) + ", " + std::to_string(max) + "]");
            }
            c.*field = n;
          },
          [field](const RunConfig& c) { return std::optional(std::to_string(c.*field)); }};
}

KeyDef real_key(std::string section, std::string name, double RunConfig::*field, Range range) {
  return {std::move(section), std::move(name),
          [field, range](RunConfig& c, const std::string& v) {
            const auto x = parse_number<double>(v);
            range.check(x);
            c.*field = x;
          },
          [field](const RunConfig& c) { return std::optional(format_double(c.*field)); }};
}

KeyDef optional_real_key(std::string section, std::string name, std::optional<double> RunConfig::*field) {
  return {std::move(section), std::move(name),
          [field](RunConfig& c, const std::string& v) { c.*field = parse_number<double>(v); },
          [field](const RunConfig& c) -> std::optional<std::string> {
            if (!(c.*field)) return std::nullopt;
            return format_double(*(c.*field));
          }};
}

KeyDef text_key(std::string section, std::string name, std::string RunConfig::*field,
                std::vector<std::string> choices = {}) {
  return {std::move(section), std::move(name),
          [field, choices](RunConfig& c, const std::string& v) {
            if (!choices.empty() && std::find(choices.begin(), choices.end(), v) == choices.end()) {
              std::string allowed;
              for (const auto& ch : choices) allowed += (allowed.empty() ? "" : ", ") + ch;
              throw ConfigError("'" + v + "' is not one of: " + allowed);
            }
            c.*field = v;
          },
          [field](const RunConfig& c) { return std::optional(c.*field); }};
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ", ";
    if constexpr (std::is_same_v<T, double>) {
      out += format_double(item);
    } else if constexpr (std::is_same_v<T, std::string>) {
      out += item;
    } else {
      out += std::to_string(item);
    }
  }
  return out;
}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = [] {
    std::vector<KeyDef> t;
    t.push_back(u64_key("run", "seed", &RunConfig::seed));
    t.push_back(text_key("run", "out", &RunConfig::out));

    t.push_back(text_key("dataset", "source", &RunConfig::source, {"synthetic", "cifar10"}));
    t.push_back(u64_key("dataset", "synthetic_seed", &RunConfig::synthetic_seed));
    t.push_back(size_key("dataset", "train_count", &RunConfig::train_count, 100));
    t.push_back(size_key("dataset", "test_count", &RunConfig::test_count, 100));
    t.push_back(text_key("dataset", "cifar_dir", &RunConfig::cifar_dir));

    t.push_back({"zoo", "models",
                 [](RunConfig& c, const std::string& v) {
                   const auto known = zoo_architectures();
                   auto names = split_list(v);
                   for (const auto& n : names) {
                     if (std::none_of(known.begin(), known.end(), [&](const Architecture& a) { return a.name == n; })) {
                       throw ConfigError("unknown zoo architecture '" + n + "'");
                     }
                   }
                   if (std::set<std::string>(names.begin(), names.end()).size() != names.size()) {
                     throw ConfigError("duplicate zoo architecture");
                   }
                   c.models = std::move(names);
                 },
                 [](const RunConfig& c) { return std::optional(join(c.models)); }});
    t.push_back(size_key("zoo", "epochs", &RunConfig::epochs, 1));
    t.push_back(size_key("zoo", "batch_size", &RunConfig::batch_size, 1));
    t.push_back(real_key("zoo", "learning_rate", &RunConfig::learning_rate, kPositive));
    t.push_back(real_key("zoo", "momentum", &RunConfig::momentum, kFraction));
    t.push_back(text_key("zoo", "lr_schedule", &RunConfig::lr_schedule, {"linear", "constant"}));

    t.push_back(size_key("attack", "target", &RunConfig::target, 0, 255));
    t.push_back(size_key("attack", "iterations", &RunConfig::iterations, 0));
    t.push_back(size_key("attack", "batch", &RunConfig::batch, 1));
    t.push_back(real_key("attack", "step", &RunConfig::step, kPositive));
    t.push_back(real_key("attack", "beta1", &RunConfig::beta1, kFraction));
    t.push_back(real_key("attack", "beta2", &RunConfig::beta2, kFraction));
    t.push_back(size_key("attack", "patch_size", &RunConfig::patch_size, 2, 4096));
    t.push_back(text_key("attack", "mask", &RunConfig::mask));
    t.push_back({"attack", "train_models",
                 [](RunConfig& c, const std::string& v) {
                   std::vector<std::size_t> idx;
                   for (const auto& item : split_list(v)) {
                     const auto n = parse_number<std::size_t>(item);
                     if (n < 1) throw ConfigError("zoo positions are 1-based");
                     idx.push_back(n);
                   }
                   c.train_models = std::move(idx);
                 },
                 [](const RunConfig& c) { return std::optional(join(c.train_models)); }});

    t.push_back(real_key("transform", "rotation_min_deg", &RunConfig::rotation_min_deg, {-180, 180}));
    t.push_back(real_key("transform", "rotation_max_deg", &RunConfig::rotation_max_deg, {-180, 180}));
    t.push_back(real_key("transform", "scale_min", &RunConfig::scale_min, kUnitOpenLow));
    t.push_back(real_key("transform", "scale_max", &RunConfig::scale_max, kUnitOpenLow));

    t.push_back(text_key("camouflage", "mode", &RunConfig::camouflage, {"none", "hard", "soft"}));
    t.push_back(real_key("camouflage", "epsilon", &RunConfig::epsilon, kUnitOpenLow));
    t.push_back(real_key("camouflage", "lambda", &RunConfig::lambda, kNonNegative));
    t.push_back(text_key("camouflage", "reference", &RunConfig::reference));

    t.push_back(real_key("eval", "scale", &RunConfig::scale, kUnitOpenLow));
    t.push_back({"eval", "scales",
                 [](RunConfig& c, const std::string& v) {
                   std::vector<double> s;
                   for (const auto& item : split_list(v)) {
                     s.push_back(parse_number<double>(item));
                     kUnitOpenLow.check(s.back());
                   }
                   c.scales = std::move(s);
                 },
                 [](const RunConfig& c) { return std::optional(join(c.scales)); }});
    t.push_back(size_key("eval", "trials", &RunConfig::trials, 1));
    t.push_back({"eval", "protocols",
                 [](RunConfig& c, const std::string& v) {
                   auto names = split_list(v);
                   for (const auto& n : names) parse_protocol(n);
                   c.protocols = std::move(names);
                 },
                 [](const RunConfig& c) { return std::optional(join(c.protocols)); }});
    t.push_back(optional_real_key("eval", "rotation_min_deg", &RunConfig::eval_rotation_min_deg));
    t.push_back(optional_real_key("eval", "rotation_max_deg", &RunConfig::eval_rotation_max_deg));
    (void)kAny;
    return t;
  }();
  return table;
}

std::string serialize(const RunConfig& config, bool include_out) {
  std::ostringstream os;
  std::string section;
  for (const auto& key : key_table()) {
    if (!include_out && key.section == "run" && key.name == "out") continue;
    const auto value = key.format(config);
    if (!value) continue;
    if (key.section != section) {
      if (!section.empty()) os << '\n';
      section = key.section;
      os << '[' << section << "]\n";
    }
    os << key.name << " = " << *value << '\n';
  }
  return os.str();
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::set<std::string> sections;
  for (const auto& key : key_table()) sections.insert(key.section);

  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
    const auto where = "config line " + std::to_string(line_no) + ": ";
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    const KeyDef* def = nullptr;
    for (const auto& key : key_table()) {
      if (key.name != name || (!section.empty() && key.section != section)) continue;
      if (def) throw ConfigError(where + "key '" + name + "' is ambiguous outside a section");
      def = &key;
    }
    if (!def) {
      throw ConfigError(where + "unknown key '" + name + "'" + (section.empty() ? "" : " in [" + section + "]"));
    }
    const std::string qualified = def->section + "." + def->name;
    if (!seen.insert(qualified).second) throw ConfigError(where + "duplicate key '" + qualified + "'");
    try {
      def->parse(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + "key '" + qualified + "': " + e.what());
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig config = parse_config(buffer.str());
  validate(config);
  return config;
}

std::string serialize_config(const RunConfig& config) { return serialize(config, true); }

std::uint64_t config_hash(const RunConfig& config) { return fnv1a64(serialize(config, false)); }

void validate(const RunConfig& c) {
  if (c.source == "cifar10") {
    if (c.cifar_dir.empty()) throw ConfigError("dataset.cifar_dir is required when dataset.source = cifar10");
    if (!std::filesystem::is_directory(c.cifar_dir)) throw ConfigError("dataset.cifar_dir does not exist: " + c.cifar_dir);
  } else if (c.train_count % kSyntheticClasses != 0 || c.test_count % kSyntheticClasses != 0) {
    throw ConfigError("dataset counts must be multiples of 10 for the synthetic dataset");
  }
  if (c.target >= 10) throw ConfigError("attack.target must be a class index below 10");
  for (auto m : c.train_models) {
    if (m > c.models.size()) throw ConfigError("attack.train_models refers to zoo position " + std::to_string(m));
  }
  if (c.mask != "circle" && c.mask != "square" && c.mask != "peace" && !std::filesystem::exists(c.mask)) {
    throw ConfigError("attack.mask is neither a built-in shape nor an existing file: " + c.mask);
  }
  if (c.reference != "tie-dye" && !std::filesystem::exists(c.reference)) {
    throw ConfigError("camouflage.reference is neither 'tie-dye' nor an existing file: " + c.reference);
  }
  if (c.rotation_min_deg > c.rotation_max_deg) throw ConfigError("transform rotation range is empty");
  if (c.scale_min > c.scale_max) throw ConfigError("transform scale range is empty");
  const auto settings = eval_settings(c);
  if (settings.rotation_min > settings.rotation_max) throw ConfigError("eval rotation range is empty");
  check_feasible(transform_distribution(c), 32, 32);
  std::vector<double> all = c.scales;
  all.push_back(c.scale);
  for (double s : all) {
    check_feasible(TransformDistribution::fixed_scale(s, settings.rotation_min, settings.rotation_max), 32, 32);
  }
  for (const auto& p : c.protocols) {
    if (parse_protocol(p) == ProtocolKind::Blackbox && c.models.size() < 2) {
      throw ConfigError("blackbox protocol needs at least two zoo models");
    }
  }
}

Dataset load_dataset(const RunConfig& config) {
  if (config.source == "cifar10") return load_cifar10(config.cifar_dir);
  return generate_synthetic(config.synthetic_seed, config.train_count, config.test_count);
}

std::vector<Architecture> configured_architectures(const RunConfig& config, const ImageShape& input,
                                                   std::size_t classes) {
  const auto zoo = zoo_architectures(input, classes);
  std::vector<Architecture> out;
  for (const auto& name : config.models) {
    const auto it = std::find_if(zoo.begin(), zoo.end(), [&](const Architecture& a) { return a.name == name; });
    if (it == zoo.end()) throw ConfigError("unknown zoo architecture '" + name + "'");
    out.push_back(*it);
  }
  return out;
}

TrainOptions zoo_train_options(const RunConfig& config, std::size_t zoo_position) {
  TrainOptions o;
  o.epochs = config.epochs;
  o.batch_size = config.batch_size;
  o.learning_rate = config.learning_rate;
  o.momentum = config.momentum;
  o.linear_decay = config.lr_schedule == "linear";
  o.seed = child_seed(config.seed, 0x200 + zoo_position);
  return o;
}

AttackConfig attack_config(const RunConfig& config) {
  AttackConfig a;
  a.target = config.target;
  a.iterations = config.iterations;
  a.batch = config.batch;
  a.adam.step = config.step;
  a.adam.beta1 = config.beta1;
  a.adam.beta2 = config.beta2;
  a.seed = child_seed(config.seed, 0x300);
  a.config_hash = config_hash(config);
  return a;
}

TransformDistribution transform_distribution(const RunConfig& config) {
  return {config.rotation_min_deg * kDegree, config.rotation_max_deg * kDegree, config.scale_min, config.scale_max};
}

EvalSettings eval_settings(const RunConfig& config) {
  EvalSettings e;
  e.target = config.target;
  e.trials = config.trials;
  e.rotation_min = config.eval_rotation_min_deg.value_or(config.rotation_min_deg) * kDegree;
  e.rotation_max = config.eval_rotation_max_deg.value_or(config.rotation_max_deg) * kDegree;
  e.seed = child_seed(config.seed, 0x400);
  return e;
}

Tensor configured_mask(const RunConfig& config) {
  if (config.mask == "circle") return circle_mask(config.patch_size);
  if (config.mask == "square") return square_mask(config.patch_size);
  if (config.mask == "peace") return peace_mask(config.patch_size);
  Tensor mask = read_png_mask(config.mask);
  if (mask.shape() != Shape{config.patch_size, config.patch_size}) {
    throw ConfigError("mask image " + config.mask + " is " + to_string(mask.shape()) + ", expected " +
                      std::to_string(config.patch_size) + "x" + std::to_string(config.patch_size));
  }
  return mask;
}

Camouflage configured_camouflage(const RunConfig& config, std::size_t channels) {
  Camouflage camo;
  if (config.camouflage == "none") return camo;
  camo.mode = config.camouflage == "hard" ? CamouflageMode::Hard : CamouflageMode::Soft;
  camo.epsilon = config.epsilon;
  camo.lambda = config.lambda;
  if (config.reference == "tie-dye") {
    camo.reference = tie_dye_pattern(channels, config.patch_size, child_seed(config.seed, 0x500));
  } else {
    camo.reference = read_png_rgb(config.reference);
    if (camo.reference.shape() != Shape{channels, config.patch_size, config.patch_size}) {
      throw ConfigError("camouflage reference image " + config.reference + " has the wrong size");
    }
  }
  return camo;
}

SuiteOptions suite_options(const RunConfig& config, std::size_t channels) {
  SuiteOptions s;
  s.attack = attack_config(config);
  s.train_transforms = transform_distribution(config);
  s.patch_side = config.patch_size;
  s.mask = configured_mask(config);
  s.camouflage = configured_camouflage(config, channels);
  s.scales = config.scales;
  s.eval = eval_settings(config);
  s.protocols.clear();
  for (const auto& p : config.protocols) s.protocols.push_back(parse_protocol(p));
  return s;
}

}  // namespace advpatch
