#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "advpatch/attack.hpp"
#include "advpatch/binary_io.hpp"
#include "advpatch/ops.hpp"
#include "advpatch/patch_io.hpp"
#include "advpatch/pgd.hpp"
#include "advpatch/png_io.hpp"
#include "advpatch/synthetic.hpp"
#include "advpatch/warp.hpp"
#include "test_support.hpp"

using namespace advpatch;
using advpatch::testing::constant_classifier;
using advpatch::testing::random_tensor;
namespace fs = std::filesystem;

namespace {

const ImageShape kSmall{3, 8, 8};

Patch random_patch(std::size_t side, std::uint64_t seed, Tensor mask = {}) {
  Patch p = make_patch(3, mask.rank() == 2 ? mask : circle_mask(side), 9);
  p.latent = random_tensor({3, side, side}, seed, -3, 3);
  return p;
}

Classifier stub_net(std::uint64_t seed) {
  return init_weights({"stub", kSmall, 10, {ConvLayer{4, 3, 1, 1}, ReluLayer{}, DenseLayer{10}}}, seed);
}

}  // namespace

TEST(Patch, ZeroLatentIsMidGray) {
  const Patch p = make_patch(3, circle_mask(6), 9);
  EXPECT_TRUE(pixels(p).identical(Tensor::full({3, 6, 6}, 0.5)));
}

TEST(Patch, LargeLatentSaturates) {
  Patch p = make_patch(3, circle_mask(4), 9);
  p.latent = Tensor::full({3, 4, 4}, 10.0);
  EXPECT_GT(pixels(p).values().minCoeff(), 0.9999);
}

TEST(Patch, EncodeInvertsPixels) {
  const Tensor px = random_tensor({3, 5, 5}, 2, 0.01, 0.99);
  Patch p = make_patch(3, square_mask(5), 0);
  p.latent = encode_pixels(px);
  EXPECT_LT((pixels(p).values() - px.values()).abs().maxCoeff(), 1e-15);
}

TEST(Patch, Masks) {
  const Tensor circle = circle_mask(16);
  EXPECT_EQ(circle[0], 0.0);
  EXPECT_EQ(circle[8 * 16 + 8], 1.0);
  EXPECT_EQ(circle[8 * 16 + 0], 1.0);
  const Tensor peace = peace_mask(32);
  EXPECT_EQ(peace[16 * 32 + 16], 1.0);  // vertical bar through the center
  EXPECT_GT(peace.values().sum(), 0.0);
  EXPECT_LT(peace.values().sum(), circle_mask(32).values().sum());
  for (const Tensor* m : {&circle, &peace}) EXPECT_TRUE(((m->values() == 0.0) || (m->values() == 1.0)).all());
}

TEST(Patch, ValidateRejectsBadMasksAndCamouflage) {
  EXPECT_THROW(validate(make_patch(3, Tensor::zeros({4, 4}), 0)), ConfigError);
  EXPECT_THROW(validate(make_patch(3, Tensor::full({4, 4}, 0.5), 0)), ConfigError);
  Patch p = make_patch(3, square_mask(4), 0);
  p.camouflage = {CamouflageMode::Hard, Tensor::full({3, 4, 4}, 0.5), 0.0, 0.0};
  EXPECT_THROW(validate(p), ConfigError);
  p.camouflage = {CamouflageMode::Soft, Tensor::full({3, 4, 4}, 0.5), 0.1, -1.0};
  EXPECT_THROW(validate(p), ConfigError);
  p.camouflage = {CamouflageMode::Hard, Tensor::full({3, 5, 5}, 0.5), 0.1, 0.0};
  EXPECT_THROW(validate(p), ConfigError);
}

TEST(ApplyPatch, ZeroMaskIsIdentity) {
  const Tensor x = random_tensor({3, 32, 32}, 3);
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const AffineTransform t = sample_transform({}, 32, 32, rng);
    EXPECT_TRUE(composite(random_tensor({3, 8, 8}, 5 + i), Tensor::zeros({8, 8}), x, t).identical(x));
  }
}

TEST(ApplyPatch, FullMaskWholeImageReplaces) {
  const Patch p = random_patch(32, 6, square_mask(32));
  const Tensor out = apply_patch(p, random_tensor({3, 32, 32}, 7), AffineTransform{0.0, 1.0, 16.0, 16.0});
  EXPECT_TRUE(out.identical(pixels(p)));
}

TEST(ApplyPatch, ExactWhereMaskIsZeroOrOneAndInRange) {
  Rng rng(8);
  for (int i = 0; i < 40; ++i) {
    Patch p = random_patch(12, 20 + i, i % 2 ? circle_mask(12) : peace_mask(12));
    if (i % 4 == 0) p.latent = Tensor::full(p.latent.shape(), i % 8 == 0 ? 40.0 : -40.0);
    const Tensor x = i % 3 == 0 ? Tensor::full({3, 32, 32}, i % 2 ? 1.0 : 0.0) : random_tensor({3, 32, 32}, 60 + i);
    const AffineTransform t = sample_transform({}, 32, 32, rng);
    const Tensor out = apply_patch(p, x, t);
    const WarpPlan plan = make_warp_plan(12, t, 32, 32);
    const Tensor pt = warp_bilinear(pixels(p), plan), mt = warp_bilinear(p.mask, plan);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t k = 0; k < 32 * 32; ++k) {
        const double v = out[ch * 1024 + k];
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        if (mt[k] == 1.0) ASSERT_EQ(v, pt[ch * 1024 + k]);
        if (mt[k] == 0.0) ASSERT_EQ(v, x[ch * 1024 + k]);
      }
    }
  }
}

TEST(Eot, UniformModelGivesLogOneOverK) {
  const Patch p = random_patch(4, 1, square_mask(4));
  const std::vector<EotSample> batch{{random_tensor(kSmall.single(), 2), {0.3, 0.25, 4, 4}},
                                     {random_tensor(kSmall.single(), 3), {0.0, 0.25, 4, 4}}};
  const Classifier uniform_model = constant_classifier(kSmall, 10, {});
  const Classifier models[] = {uniform_model};
  EXPECT_NEAR(eot_objective(p, batch, models).item(), std::log(0.1), 1e-15);
}

TEST(Eot, MeanOverSamplesAndModels) {
  const Patch p = random_patch(4, 4, square_mask(4));
  const std::vector<EotSample> batch{{random_tensor(kSmall.single(), 5), {0.1, 0.25, 4, 4}},
                                     {random_tensor(kSmall.single(), 6), {-0.2, 0.25, 4.2, 3.8}}};
  const Classifier a = stub_net(1), b = stub_net(2);
  auto term = [&](const Classifier& m, const EotSample& s) {
    return pick(predict_log_prob(m, reshape(apply_patch(p, s.image, s.transform), kSmall.batch(1))), 9).item();
  };
  const Classifier one[] = {a};
  const double single = eot_objective(p, std::span(batch).first(1), one).item();
  // Decomposition: one model, one sample equals log_softmax(logits)[target].
  EXPECT_LT(std::abs(single - term(a, batch[0])), 1e-10);
  EXPECT_LT(std::abs(eot_objective(p, batch, one).item() - (term(a, batch[0]) + term(a, batch[1])) / 2), 1e-10);
  const Classifier both[] = {a, b};
  const double expected = (term(a, batch[0]) + term(a, batch[1]) + term(b, batch[0]) + term(b, batch[1])) / 4;
  EXPECT_LT(std::abs(eot_objective(p, batch, both).item() - expected), 1e-10);
}

TEST(Eot, SoftPenaltyIsSubtracted) {
  Patch p = random_patch(4, 7, square_mask(4));
  const std::vector<EotSample> batch{{random_tensor(kSmall.single(), 8), {0.0, 0.25, 4, 4}}};
  const Classifier models[] = {stub_net(3)};
  const double plain = eot_objective(p, batch, models).item();
  p.camouflage = {CamouflageMode::Soft, random_tensor({3, 4, 4}, 9), 0.1, 0.25};
  const double dist = (pixels(p).values() - p.camouflage.reference.values()).square().sum();
  EXPECT_LT(std::abs(eot_objective(p, batch, models).item() - (plain - 0.25 * dist)), 1e-12);
}

TEST(Eot, EmptyBatchRejected) {
  const Classifier models[] = {stub_net(3)};
  EXPECT_THROW(eot_objective(random_patch(4, 1), {}, models), ConfigError);
}

class TrainPatch : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { data_ = new Dataset(generate_synthetic(5, 100, 100)); }
  static void TearDownTestSuite() { delete data_; }
  static Dataset* data_;
  static Classifier model() { return init_weights(zoo_architectures()[2], 11); }
};
Dataset* TrainPatch::data_ = nullptr;

TEST_F(TrainPatch, ZeroIterationsReturnsInit) {
  AttackConfig cfg;
  cfg.iterations = 0;
  const Classifier models[] = {model()};
  const Patch init = random_patch(16, 3);
  const auto result = train_patch(cfg, models, {}, *data_, init);
  EXPECT_TRUE(result.patch.latent.identical(init.latent));
  EXPECT_TRUE(result.objective.empty());
  EXPECT_EQ(result.patch.provenance.steps, 0u);
}

TEST_F(TrainPatch, DeterministicAndProvenanceStamped) {
  AttackConfig cfg;
  cfg.iterations = 5;
  cfg.batch = 4;
  cfg.seed = 99;
  cfg.config_hash = 0xabc;
  const Classifier models[] = {model()};
  const auto a = train_patch(cfg, models, {}, *data_, make_patch(3, circle_mask(16), 0));
  const auto b = train_patch(cfg, models, {}, *data_, make_patch(3, circle_mask(16), 0));
  EXPECT_TRUE(a.patch.latent.identical(b.patch.latent));
  EXPECT_EQ(a.objective, b.objective);
  EXPECT_EQ(a.patch.target, 9u);
  EXPECT_EQ(a.patch.provenance.steps, 5u);
  EXPECT_EQ(a.patch.provenance.seed, 99u);
  EXPECT_EQ(a.patch.provenance.config_hash, 0xabcu);
  EXPECT_EQ(a.patch.provenance.models, std::vector<std::string>{"stride2"});
  EXPECT_FALSE(a.patch.latent.identical(make_patch(3, circle_mask(16), 0).latent));
}

TEST_F(TrainPatch, HardCamouflageHoldsAfterEveryStep) {
  AttackConfig cfg;
  cfg.iterations = 30;
  cfg.batch = 4;
  cfg.adam.step = 0.5;
  const Classifier models[] = {model()};
  Patch init = make_patch(3, circle_mask(16), 9);
  init.camouflage = {CamouflageMode::Hard, tie_dye_pattern(3, 16, 4), 0.05, 0.0};
  start_from_reference(init);
  const Tensor ref = init.camouflage.reference;
  std::size_t checked = 0;
  const auto result = train_patch(cfg, models, {}, *data_, init, [&](std::size_t, const Patch& p) {
    ++checked;
    EXPECT_LE((pixels(p).values() - ref.values()).abs().maxCoeff(), 0.05 + 1e-9);
  });
  EXPECT_EQ(checked, 30u);
  EXPECT_LE((pixels(result.patch).values() - ref.values()).abs().maxCoeff(), 0.05);
}

TEST_F(TrainPatch, NonFiniteObjectiveNamesStep) {
  AttackConfig cfg;
  cfg.iterations = 3;
  cfg.batch = 2;
  Classifier broken = model();
  auto& dense = broken.weights[broken.weights.size() - 2];
  dense = Tensor::full(dense.shape(), 1e308);
  const Classifier models[] = {broken};
  try {
    train_patch(cfg, models, {}, *data_, make_patch(3, circle_mask(16), 0));
    FAIL();
  } catch (const NumericsError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(Pgd, ZeroStepsReturnsInput) {
  const Classifier m = stub_net(1);
  const Tensor x = random_tensor(kSmall.single(), 2);
  PgdOptions opts;
  opts.steps = 0;
  EXPECT_TRUE(pgd_attack(m, x, 3, opts).identical(x));
}

TEST(Pgd, ConstraintAndBoxHoldExactly) {
  const Classifier m = stub_net(2);
  for (int i = 0; i < 10; ++i) {
    const Tensor x = i % 2 ? random_tensor(kSmall.single(), 10 + i) : Tensor::full(kSmall.single(), i % 4 ? 1.0 : 0.0);
    PgdOptions opts;
    opts.steps = 15;
    opts.epsilon = i % 3 ? 8.0 / 255.0 : 0.1 / 3.0;
    opts.step_size = opts.epsilon / 3.0;
    const Tensor adv = pgd_attack(m, x, static_cast<std::size_t>(i), opts);
    EXPECT_LE((adv.values() - x.values()).abs().maxCoeff(), opts.epsilon);
    EXPECT_GE(adv.values().minCoeff(), 0.0);
    EXPECT_LE(adv.values().maxCoeff(), 1.0);
  }
}

TEST(Pgd, IncreasesTargetLogProbability) {
  const Classifier m = stub_net(3);
  const Tensor x = random_tensor(kSmall.single(), 4);
  const Tensor adv = pgd_attack(m, x, 7);
  auto logp = [&](const Tensor& img) { return pick(predict_log_prob(m, reshape(img, kSmall.batch(1))), 7).item(); };
  EXPECT_GT(logp(adv), logp(x));
}

TEST(PatchFile, RoundTrip) {
  Patch p = random_patch(7, 3, peace_mask(7));
  p.camouflage = {CamouflageMode::Soft, random_tensor({3, 7, 7}, 4), 0.2, 0.01};
  p.provenance = {0x1234, 42, 17, {"conv3", "deep4"}};
  const Patch back = decode_patch(encode_patch(p));
  EXPECT_TRUE(back.latent.identical(p.latent));
  EXPECT_TRUE(back.mask.identical(p.mask));
  EXPECT_EQ(back.camouflage.mode, p.camouflage.mode);
  EXPECT_TRUE(back.camouflage.reference.identical(p.camouflage.reference));
  EXPECT_EQ(back.camouflage.epsilon, 0.2);
  EXPECT_EQ(back.camouflage.lambda, 0.01);
  EXPECT_EQ(back.target, 9u);
  EXPECT_EQ(back.provenance, p.provenance);
  EXPECT_EQ(encode_patch(back), encode_patch(p));

  const auto path = fs::temp_directory_path() / "advpatch_patch.apzp";
  save_patch(p, path);
  EXPECT_TRUE(load_patch(path).latent.identical(p.latent));
  fs::remove(path);
}

TEST(PatchFile, FormatErrors) {
  Bytes bytes = encode_patch(random_patch(4, 1));
  Bytes bad = bytes;
  bad[1] = 'Q';
  try {
    decode_patch(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  const std::size_t cut = 16 + 8 * 20 + 3;
  try {
    decode_patch(std::span(bytes).first(cut));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), cut);
  }
  bytes.push_back(1);
  EXPECT_THROW(decode_patch(bytes), FormatError);
}

TEST(PatchPng, ExportRoundsAndMaskImports) {
  const fs::path dir = fs::temp_directory_path() / "advpatch_png";
  Values v(3 * 2 * 2);
  v << 0.0, 1.0, 0.5, 0.25, 0.1, 0.2, 0.3, 0.4, 0.9, 0.8, 0.7, 0.6;
  write_png(dir / "img.png", Tensor({3, 2, 2}, v), {{"config_hash", "00ff"}});
  const Tensor back = read_png_rgb(dir / "img.png");
  for (Eigen::Index i = 0; i < v.size(); ++i) EXPECT_EQ(back[i], std::round(v[i] * 255.0) / 255.0);

  const Tensor mask = peace_mask(16);
  write_png(dir / "mask.png", mask);
  EXPECT_TRUE(read_png_mask(dir / "mask.png").identical(mask));
  const Bytes png = read_file(dir / "img.png");
  const std::string text(png.begin(), png.end());
  EXPECT_NE(text.find("config_hash"), std::string::npos);
  fs::remove_all(dir);
}
