#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "advpatch/config.hpp"
#include "advpatch/rng.hpp"

using namespace advpatch;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

template <typename T>
std::vector<T> subset(Rng& rng, const std::vector<T>& all) {
  std::vector<T> out;
  for (const auto& x : all) {
    if (uniform(rng, 0, 1) < 0.6) out.push_back(x);
  }
  if (out.empty()) out.push_back(all[uniform_index(rng, all.size())]);
  return out;
}

RunConfig fuzzed(std::uint64_t seed) {
  Rng rng(seed);
  RunConfig c;
  c.seed = rng();
  c.out = "runs/fuzz-" + std::to_string(seed);
  c.synthetic_seed = rng();
  c.train_count = 10 * (10 + uniform_index(rng, 600));
  c.test_count = 10 * (10 + uniform_index(rng, 100));
  c.models = subset<std::string>(rng, {"conv3", "conv5", "stride2", "deep4", "wide3"});
  c.epochs = 1 + uniform_index(rng, 20);
  c.batch_size = 1 + uniform_index(rng, 128);
  c.learning_rate = uniform(rng, 1e-4, 0.2);
  c.momentum = uniform(rng, 0, 0.99);
  c.lr_schedule = uniform(rng, 0, 1) < 0.5 ? "linear" : "constant";
  c.target = uniform_index(rng, 10);
  c.iterations = uniform_index(rng, 5000);
  c.batch = 1 + uniform_index(rng, 32);
  c.step = uniform(rng, 1e-3, 0.5);
  c.beta1 = uniform(rng, 0, 0.99);
  c.beta2 = uniform(rng, 0.9, 0.9999);
  c.patch_size = 4 + uniform_index(rng, 28);
  c.mask = std::vector<std::string>{"circle", "square", "peace"}[uniform_index(rng, 3)];
  c.train_models.clear();
  for (std::size_t i = 1; i <= c.models.size(); ++i) {
    if (c.train_models.empty() || uniform(rng, 0, 1) < 0.5) c.train_models.push_back(i);
  }
  c.rotation_min_deg = uniform(rng, -20, 0);
  c.rotation_max_deg = uniform(rng, 0, 20);
  c.scale_min = uniform(rng, 0.01, 0.1);
  c.scale_max = uniform(rng, 0.1, 0.3);
  c.camouflage = std::vector<std::string>{"none", "hard", "soft"}[uniform_index(rng, 3)];
  c.epsilon = uniform(rng, 0.01, 0.5);
  c.lambda = uniform(rng, 0, 1);
  c.scale = uniform(rng, 0.02, 0.3);
  c.scales = {uniform(rng, 0.02, 0.1), uniform(rng, 0.1, 0.3)};
  c.trials = 1 + uniform_index(rng, 1000);
  c.protocols = subset<std::string>(rng, {"whitebox-single", "whitebox-ensemble", "blackbox", "control"});
  if (c.models.size() < 2) std::erase(c.protocols, "blackbox");
  if (c.protocols.empty()) c.protocols = {"control"};
  if (uniform(rng, 0, 1) < 0.5) {
    c.eval_rotation_min_deg = uniform(rng, -10, 0);
    c.eval_rotation_max_deg = uniform(rng, 0, 10);
  }
  return c;
}

}  // namespace

TEST(Config, EmptyTextGivesValidDefaults) {
  const RunConfig c = parse_config("");
  EXPECT_EQ(c, RunConfig{});
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.models.size(), 5u);
  EXPECT_EQ(c.trials, 400u);
  EXPECT_EQ(c.target, 9u);
}

TEST(Config, SectionsCommentsAndUnqualifiedKeys) {
  const RunConfig c = parse_config(
      "# a run\n"
      "seed = 42\n"
      "iterations = 10   # short\n"
      "[eval]\n"
      "scales = 0.1, 0.2\n"
      "rotation_min_deg = -5\n"
      "[transform]\n"
      "rotation_min_deg = -10\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.iterations, 10u);
  EXPECT_EQ(c.scales, (std::vector<double>{0.1, 0.2}));
  EXPECT_EQ(c.eval_rotation_min_deg, -5.0);
  EXPECT_EQ(c.rotation_min_deg, -10.0);
}

TEST(Config, ScaleOutOfRangeRejected) {
  const std::string e = error_of("[eval]\nscale = 1.5\n");
  EXPECT_NE(e.find("line 2"), std::string::npos) << e;
  EXPECT_NE(e.find("eval.scale"), std::string::npos) << e;
  EXPECT_THROW(parse_config("scale = 0\n"), ConfigError);
  EXPECT_NO_THROW(parse_config("scale = 1\n"));
}

TEST(Config, UnknownKeyNamedWithLine) {
  const std::string e = error_of("seed = 3\n\n[attack]\nstepsize = 0.1\n");
  EXPECT_NE(e.find("line 4"), std::string::npos) << e;
  EXPECT_NE(e.find("'stepsize'"), std::string::npos) << e;
  EXPECT_NE(error_of("[nowhere]\n").find("unknown section"), std::string::npos);
}

TEST(Config, TypeMismatchRejected) {
  EXPECT_NE(error_of("trials = many\n").find("eval.trials"), std::string::npos);
  EXPECT_THROW(parse_config("trials = 3.5\n"), ConfigError);
  EXPECT_THROW(parse_config("seed = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("learning_rate = 0.1x\n"), ConfigError);
  EXPECT_THROW(parse_config("[camouflage]\nmode = invisible\n"), ConfigError);
  EXPECT_THROW(parse_config("protocols = whitebox-single, greybox\n"), ConfigError);
}

TEST(Config, StructuralErrors) {
  EXPECT_NE(error_of("rotation_min_deg = -5\n").find("ambiguous"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\nseed = 2\n").find("duplicate"), std::string::npos);
  EXPECT_THROW(parse_config("seed 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[eval\n"), ConfigError);
}

TEST(Config, CrossKeyValidation) {
  auto invalid = [](const std::string& text) {
    EXPECT_THROW(validate(parse_config(text)), ConfigError) << text;
  };
  invalid("source = cifar10\n");  // cifar_dir is required
  invalid("cifar_dir = /no/such/dir\nsource = cifar10\n");
  invalid("train_count = 1005\n");
  invalid("target = 10\n");
  invalid("train_models = 6\n");
  invalid("[attack]\nmask = /no/such/mask.png\n");
  invalid("scale_min = 0.3\nscale_max = 0.1\n");
  invalid("scales = 0.05, 0.9\n");  // the rotated footprint cannot fit
  invalid("models = conv3\ntrain_models = 1\n[eval]\nprotocols = blackbox\n");
}

TEST(Config, FuzzedRoundTrips) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const RunConfig c = fuzzed(seed);
    ASSERT_NO_THROW(validate(c)) << serialize_config(c);
    const std::string text = serialize_config(c);
    const RunConfig back = parse_config(text);
    EXPECT_EQ(back, c) << text;
    EXPECT_EQ(serialize_config(back), text);
    EXPECT_EQ(config_hash(back), config_hash(c));
  }
}

TEST(Config, HashIgnoresOutputDirectory) {
  RunConfig a, b;
  b.out = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.trials = 401;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, LoadsFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "advpatch-config-test.cfg";
  std::ofstream(path) << "[run]\nseed = 9\n";
  EXPECT_EQ(load_config(path).seed, 9u);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path), ConfigError);
}

TEST(Config, DerivedSeedsDiffer) {
  const RunConfig c;
  const auto a = zoo_train_options(c, 1), b = zoo_train_options(c, 2);
  EXPECT_NE(a.seed, b.seed);
  EXPECT_NE(attack_config(c).seed, eval_settings(c).seed);
  EXPECT_EQ(attack_config(c).config_hash, config_hash(c));
  EXPECT_DOUBLE_EQ(eval_settings(c).rotation_max, 20 * kDegree);
}
