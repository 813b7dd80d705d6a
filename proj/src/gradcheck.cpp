#include "advpatch/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "advpatch/attack.hpp"
#include "advpatch/ops.hpp"
#include "advpatch/rng.hpp"
#include "advpatch/warp.hpp"

namespace advpatch {
namespace {

Scalar evaluate(const ScalarFunction& f, const Tensor& at) {
  const Scalar v = f(at).item();
  if (!std::isfinite(v)) throw NumericsError("finite_diff_check: function evaluated to a non-finite value");
  return v;
}

}  // namespace

double finite_diff_check(const ScalarFunction& f, const Tensor& point, double h) {
  if (!(h > 0)) throw ConfigError("finite_diff_check: step must be positive");

  Tape tape;
  const Tensor x = tape.variable(point);
  const Tensor loss = f(x);
  if (!std::isfinite(loss.item())) throw NumericsError("finite_diff_check: function evaluated to a non-finite value");
  // A function that ignores its input never touches the record.
  const Values analytic = loss.tracked() ? tape.backward(loss).wrt(x).values() : Values::Zero(x.values().size());

  double worst = 0.0;
  Values probe = point.values();
  for (Eigen::Index i = 0; i < probe.size(); ++i) {
    const Scalar original = probe[i];
    probe[i] = original + h;
    const Scalar up = evaluate(f, Tensor(point.shape(), probe));
    probe[i] = original - h;
    const Scalar down = evaluate(f, Tensor(point.shape(), probe));
    probe[i] = original;

    const Scalar numeric = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1e-12, std::abs(numeric)));
  }
  return worst;
}

}  // namespace advpatch

namespace advpatch {
namespace {

Tensor uniform_tensor(Shape shape, double lo, double hi, Rng& rng) {
  Values v(static_cast<Eigen::Index>(numel(shape)));
  for (auto& x : v) x = uniform(rng, lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Inputs bounded away from zero with a small random sign pattern, so relu
// kinks sit far from every probe.
Tensor signed_tensor(Shape shape, Rng& rng) {
  Values v(static_cast<Eigen::Index>(numel(shape)));
  for (auto& x : v) x = (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.2, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

// Collapses any output to a scalar with fixed positive weights.
ScalarFunction weighted(std::function<Tensor(const Tensor&)> op, const Tensor& weights) {
  return [op = std::move(op), weights](const Tensor& x) { return sum(mul(op(x), weights)); };
}

Shape output_shape(const std::function<Tensor(const Tensor&)>& op, const Tensor& point) {
  return op(point).shape();
}

// Whole-network losses accumulate enough rounding that steps below ~1e-5 are
// dominated by it; a wider step keeps the truncation error just as small.
constexpr double kNetworkStep = 1e-4;

}  // namespace

std::vector<GradcheckResult> gradcheck_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradcheckResult> results;
  auto check = [&](const std::string& name, std::function<Tensor(const Tensor&)> op, const Tensor& point,
                   double h = 1e-6) {
    const Tensor w = uniform_tensor(output_shape(op, point), 0.5, 1.5, rng);
    results.push_back({name, finite_diff_check(weighted(std::move(op), w), point, h)});
  };

  const Tensor a = uniform_tensor({3, 4}, 0.5, 1.5, rng);
  const Tensor b = uniform_tensor({3, 4}, 0.5, 1.5, rng);
  const Tensor row = uniform_tensor({4}, 0.5, 1.5, rng);
  check("add", [&](const Tensor& x) { return add(x, b); }, a);
  check("add (broadcast)", [&](const Tensor& x) { return add(a, x); }, row);
  check("sub", [&](const Tensor& x) { return sub(b, x); }, a);
  check("mul", [&](const Tensor& x) { return mul(x, b); }, a);
  check("mul (broadcast)", [&](const Tensor& x) { return mul(a, x); }, row);
  check("scale", [](const Tensor& x) { return scale(x, -1.7); }, a);
  check("sum", [](const Tensor& x) { return sum(mul(x, x)); }, a);
  check("mean", [](const Tensor& x) { return mean(mul(x, x)); }, a);
  check("reshape", [](const Tensor& x) { return reshape(mul(x, x), {2, 6}); }, a);

  const Tensor m = uniform_tensor({4, 5}, 0.5, 1.5, rng);
  check("matmul (left)", [&](const Tensor& x) { return matmul(x, m); }, a);
  check("matmul (right)", [&](const Tensor& x) { return matmul(a, x); }, m);

  const Tensor images = uniform_tensor({2, 2, 5, 5}, 0.5, 1.5, rng);
  const Tensor kernels = uniform_tensor({3, 2, 3, 3}, 0.5, 1.5, rng);
  check("conv2d (input)", [&](const Tensor& x) { return conv2d(x, kernels, 1, 1); }, images);
  check("conv2d (kernels)", [&](const Tensor& k) { return conv2d(images, k, 1, 1); }, kernels);
  check("conv2d (stride 2, input)", [&](const Tensor& x) { return conv2d(x, kernels, 2, 1); }, images);
  check("conv2d (stride 2, kernels)", [&](const Tensor& k) { return conv2d(images, k, 2, 0); }, kernels);

  const Tensor bias = uniform_tensor({2}, 0.5, 1.5, rng);
  check("add_channel_bias (input)", [&](const Tensor& x) { return add_channel_bias(x, bias); }, images);
  check("add_channel_bias (bias)", [&](const Tensor& c) { return add_channel_bias(images, c); }, bias);

  check("relu", [](const Tensor& x) { return relu(x); }, signed_tensor({2, 2, 4, 4}, rng));
  check("sigmoid", [](const Tensor& x) { return sigmoid(x); }, uniform_tensor({3, 4}, -3, 3, rng));
  check("maxpool2d", [](const Tensor& x) { return maxpool2d(x, 2, 2); }, uniform_tensor({2, 2, 4, 4}, 0, 1, rng));
  check("log_softmax", [](const Tensor& x) { return log_softmax(x); }, uniform_tensor({3, 5}, -2, 2, rng));
  const std::vector<std::size_t> columns{4, 0, 2};
  check("pick", [&](const Tensor& x) { return pick(log_softmax(x), columns); }, uniform_tensor({3, 5}, -2, 2, rng));
  check("stack", [&](const Tensor& x) { const Tensor parts[] = {x, mul(x, x)}; return stack(parts); }, a);

  const AffineTransform t1{0.3, 0.25, 4.2, 3.9};
  const AffineTransform t2{-0.2, 0.25, 3.6, 4.4};
  const Tensor canvas = uniform_tensor({3, 4, 4}, 0.1, 0.9, rng);
  check("warp_bilinear", [&](const Tensor& c) { return warp_bilinear(c, t1, 8, 8); }, canvas);

  const Tensor latent = uniform_tensor({3, 4, 4}, -1, 1, rng);
  const Tensor full_mask = square_mask(4);
  const Tensor image = uniform_tensor({3, 8, 8}, 0, 1, rng);
  check("pixels", [&](const Tensor& w) {
    Patch p = make_patch(3, full_mask, 0);
    p.latent = w;
    return pixels(p);
  }, latent);
  check("composite", [&](const Tensor& c) { return composite(c, full_mask, image, t2); }, canvas);

  // Stub classifier: one conv layer and one dense layer on 8x8 inputs.
  Architecture stub{"stub", {3, 8, 8}, 10, {ConvLayer{4, 3, 1, 1}, DenseLayer{10}}};
  const Classifier net = init_weights(stub, child_seed(seed, 1));
  check("predict_log_prob", [&](const Tensor& x) { return predict_log_prob(net, x); },
        uniform_tensor({2, 3, 8, 8}, 0, 1, rng), kNetworkStep);

  const std::vector<EotSample> batch{{image, t1}, {uniform_tensor({3, 8, 8}, 0, 1, rng), t2}};
  const Classifier models[] = {net};
  auto eot = [&](Camouflage camo) {
    return [&, camo](const Tensor& w) {
      Patch p = make_patch(3, full_mask, 9);
      p.latent = w;
      p.camouflage = camo;
      return eot_objective(p, batch, models);
    };
  };
  results.push_back({"eot_objective", finite_diff_check(eot({}), latent, kNetworkStep)});
  Camouflage soft{CamouflageMode::Soft, uniform_tensor({3, 4, 4}, 0, 1, rng), 0.1, 0.5};
  results.push_back({"eot_objective (soft camouflage)", finite_diff_check(eot(soft), latent, kNetworkStep)});
  return results;
}

}  // namespace advpatch
