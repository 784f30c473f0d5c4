#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "survxai/attribution/attribution.hpp"
#include "survxai/error.hpp"
#include "temp_dir.hpp"
#include "test_models.hpp"

using namespace survxai;
using namespace survxai::attribution;
using namespace survxai::testing;

namespace {

// By value, so a range-for over a temporary map stays valid.
std::vector<float> values_of(Tensor t) { return std::move(t.storage()); }

void expect_near(const Tensor& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << i;
}

std::vector<double> w_times(const LinearModel& m, const Tensor& x, std::size_t target, const Tensor* baseline = nullptr) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = m.weight(target, i) * (x[i] - (baseline ? (*baseline)[i] : 0.0f));
  return out;
}

// Exact guided gradient of dense -> relu -> dense: only active hidden units with
// positive output weight pass gradient back.
std::vector<double> guided_oracle(const ReluNet& net, const Tensor& x, std::size_t target) {
  const std::size_t h = net.w1.dim(0), d = net.w1.dim(1);
  std::vector<double> out(d, 0.0);
  for (std::size_t j = 0; j < h; ++j) {
    const double v = net.w2[target * h + j];
    if (net.pre(j, x.values()) <= 0.0 || v <= 0.0) continue;
    for (std::size_t i = 0; i < d; ++i) out[i] += net.w1[j * d + i] * v;
  }
  return out;
}

// Sum of the right Riemann sum over t_k = k / steps of grad f(t x) . x, from the weights.
// Each hidden unit's indicator flips at most once along the ray, which bounds the
// gap to the exact integral by sum_j |v_j| |w_j . x| / steps.

}  // namespace

TEST(InputXGradient, LinearOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = LinearModel::random(7, 2, rng);
    const Tensor x = random_tensor({7}, rng);
    expect_near(input_x_gradient(m, x, 1), w_times(m, x, 1), 1e-6);
  }
}

TEST(InputXGradient, ZeroAndBilinear) {
  std::mt19937_64 rng(2);
  const auto m = LinearModel::random(5, 2, rng);
  for (float v : values_of(input_x_gradient(m, Tensor({5}, 0.0f), 0))) EXPECT_EQ(v, 0.0f);
  const Tensor x = random_tensor({5}, rng);
  Tensor x2 = x;
  for (float& v : x2.storage()) v *= 2.0f;
  const Tensor a = input_x_gradient(m, x, 0), b = input_x_gradient(m, x2, 0);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(b[i], 2.0f * a[i], 1e-5);
}

TEST(IntegratedGradients, LinearAnySteps) {
  std::mt19937_64 rng(3);
  const auto m = LinearModel::random(6, 2, rng);
  const Tensor x = random_tensor({6}, rng), base = random_tensor({6}, rng);
  for (std::size_t steps : {2u, 7u, 50u}) {
    expect_near(integrated_gradients(m, x, 1, steps), w_times(m, x, 1), 1e-5);
    expect_near(integrated_gradients(m, x, 1, steps, &base), w_times(m, x, 1, &base), 1e-5);
  }
  for (float v : values_of(integrated_gradients(m, x, 1, 10, &x))) EXPECT_NEAR(v, 0.0f, 1e-7);
  EXPECT_THROW(integrated_gradients(m, x, 1, 1), ValidationError);
}

TEST(IntegratedGradients, CompletenessOnBiasFreeReluNets) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const ReluNet net(8, 12, 2, rng, false);
    const Tensor x = random_tensor({8}, rng);
    const Tensor map = integrated_gradients(net, x, 1, 256);
    const double total = std::accumulate(map.values().begin(), map.values().end(), 0.0);
    const double delta = logit(net, x, 1) - logit(net, Tensor({8}, 0.0f), 1);
    EXPECT_LE(std::abs(total - delta), 1e-3 * std::abs(delta) + 1e-5) << trial;
  }
}

TEST(IntegratedGradients, BiasedReluNetsMatchRiemannOracle) {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 20; ++trial) {
    const ReluNet net(8, 12, 2, rng);
    const Tensor x = random_tensor({8}, rng);
    for (std::size_t steps : {16u, 256u}) {
      const Tensor map = integrated_gradients(net, x, 1, steps);
      const double total = std::accumulate(map.values().begin(), map.values().end(), 0.0);
      const auto oracle = riemann_oracle(net, x, 1, steps);
      EXPECT_NEAR(total, oracle.sum, 1e-5) << trial;
      const double delta = logit(net, x, 1) - logit(net, Tensor({8}, 0.0f), 1);
      EXPECT_LE(std::abs(total - delta), oracle.kink_bound + 1e-5) << trial;
    }
  }
}

TEST(GradientShap, LinearNoiseFree) {
  std::mt19937_64 rng(5);
  const auto m = LinearModel::random(6, 2, rng);
  const Tensor x = random_tensor({6}, rng);
  for (std::size_t n : {1u, 5u, 40u}) expect_near(gradient_shap(m, x, 0, {n, 0.0, 9}), w_times(m, x, 0), 1e-5);
}

TEST(GradientShap, DeterministicAndConvergesToIg) {
  std::mt19937_64 rng(6);
  const ReluNet net(6, 10, 2, rng);
  const Tensor x = random_tensor({6}, rng);
  const GradientShapConfig cfg{20, 0.1, 3};
  EXPECT_EQ(gradient_shap(net, x, 1, cfg), gradient_shap(net, x, 1, cfg));
  const Tensor gs = gradient_shap(net, x, 1, {4000, 0.0, 8});
  const Tensor ig = integrated_gradients(net, x, 1, 256);
  double mae = 0.0;
  for (std::size_t i = 0; i < 6; ++i) mae += std::abs(gs[i] - ig[i]) / 6.0;
  EXPECT_LE(mae, 0.05);
}

TEST(GuidedBackprop, LinearEqualsGradient) {
  std::mt19937_64 rng(7);
  const auto m = LinearModel::random(5, 2, rng);
  const Tensor x = random_tensor({5}, rng);
  const Tensor g = guided_backprop(m, x, 1);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(g[i], m.weight(1, i), 1e-6);
}

TEST(GuidedBackprop, PositivePathEqualsStandardGradient) {
  // Positive weights and inputs: every hidden unit active, every backward signal positive.
  std::mt19937_64 rng(8);
  ReluNet net(5, 6, 2, rng);
  for (auto* t : {&net.w1, &net.b1, &net.w2})
    for (float& v : t->storage()) v = std::abs(v) + 0.01f;
  const Tensor x = random_tensor({5}, rng, 0.1f, 1.0f);
  const Tensor a = guided_backprop(net, x, 0), b = gradient(net, x, 0);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(GuidedBackprop, MatchesPerUnitOracle) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const ReluNet net(6, 9, 2, rng);
    const Tensor x = random_tensor({6}, rng);
    expect_near(guided_backprop(net, x, 1), guided_oracle(net, x, 1), 1e-5);
  }
}

namespace {

float pooled_gradient(const ConvNet& net, const Tensor& x, std::size_t target, Tensor* act = nullptr) {
  Tape t;
  Tensor seed({1, 2});
  seed[target] = 1.0f;
  t.backward(net.logits(t, t.leaf(tensor::stack({&x}))), seed);
  const auto cap = t.capture("conv");
  if (act) *act = cap.activations;
  return cap.gradients[0];
}

}  // namespace

TEST(GradCam, SingleChannelProportionalToActivation) {
  // One channel: the cam is the activation scaled by the (uniform) pooled head gradient.
  std::mt19937_64 rng(10);
  for (int found = 0, tries = 0; found < 5 && tries < 200; ++tries) {
    const ConvNet net(1, 1, {4, 4, 4}, rng);
    const Tensor x = random_tensor({1, 4, 4, 4}, rng);
    Tensor act;
    const float g0 = pooled_gradient(net, x, 0, &act), g1 = pooled_gradient(net, x, 1);
    if ((g0 > 0) == (g1 > 0) || *std::max_element(act.storage().begin(), act.storage().end()) <= 0.0f) continue;
    ++found;
    const std::size_t pos = g0 > 0 ? 0 : 1;
    const float g = std::max(g0, g1);
    const Tensor cam = grad_cam(net, x, pos, "conv");
    for (std::size_t i = 0; i < cam.size(); ++i) EXPECT_NEAR(cam[i], g * act[i], 1e-5);
    for (float v : values_of(grad_cam(net, x, 1 - pos, "conv"))) EXPECT_EQ(v, 0.0f);
    for (float v : values_of(guided_gradcam(net, x, 1 - pos, "conv"))) EXPECT_EQ(v, 0.0f);
  }
}

TEST(GradCam, GuidedZeroWhereCamZero) {
  std::mt19937_64 rng(12);
  const ConvNet net(2, 3, {4, 4, 4}, rng);
  const Tensor x = random_tensor({2, 4, 4, 4}, rng);
  const Tensor cam = grad_cam(net, x, 1, "conv"), gg = guided_gradcam(net, x, 1, "conv");
  ASSERT_EQ(cam.shape(), x.shape());
  for (std::size_t i = 0; i < cam.size(); ++i)
    if (cam[i] == 0.0f) EXPECT_EQ(gg[i], 0.0f);
  EXPECT_THROW(grad_cam(net, x, 1, "missing"), ValidationError);
}

TEST(KernelShap, ExhaustiveLinearIsExact) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = LinearModel::random(4, 2, rng);
    const Tensor x = random_tensor({4}, rng);
    expect_near(kernel_shap(m, x, 1, {256, 1, 0}), w_times(m, x, 1), 1e-4);
  }
}

TEST(KernelShap, ConstantModelGivesZeros) {
  const ConstantModel m(8);
  std::mt19937_64 rng(14);
  for (float v : values_of(kernel_shap(m, random_tensor({8}, rng), 0, {64, 2, 1}))) EXPECT_NEAR(v, 0.0f, 1e-7);
}

TEST(KernelShap, SampledIsDeterministicAndEfficient) {
  std::mt19937_64 rng(15);
  const ReluNet net(40, 10, 2, rng);
  const Tensor x = random_tensor({40}, rng);
  const KernelShapConfig cfg{64, 2, 5};  // 20 groups: sampled coalitions
  const Tensor a = kernel_shap(net, x, 1, cfg);
  EXPECT_EQ(a, kernel_shap(net, x, 1, cfg));
  const double total = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  EXPECT_NEAR(total, logit(net, x, 1) - logit(net, Tensor({40}, 0.0f), 1), 1e-4);
}

TEST(KernelShap, FeatureGroups) {
  const auto flat = feature_groups({10}, 4);
  ASSERT_EQ(flat.size(), 3u);
  EXPECT_EQ(flat[2], (std::vector<std::uint32_t>{8, 9}));
  const auto blocks = feature_groups({1, 4, 4, 6}, 2);
  EXPECT_EQ(blocks.size(), 2u * 2u * 3u);
  std::size_t covered = 0;
  for (const auto& g : blocks) covered += g.size();
  EXPECT_EQ(covered, 96u);
}

TEST(Dispatch, AttributeAndNames) {
  std::mt19937_64 rng(16);
  const ConvNet net(1, 2, {4, 4, 4}, rng);
  const Tensor x = random_tensor({1, 4, 4, 4}, rng);
  MethodOptions opts;
  opts.gradcam_layer = "conv";
  opts.kernel_shap.group_size = 2;
  for (Method m : kAllMethods) {
    EXPECT_EQ(parse_method(to_string(m)), m);
    const Tensor a = attribute(m, net, x, 0, opts);
    EXPECT_EQ(a.shape(), x.shape()) << to_string(m);
    EXPECT_TRUE(a.all_finite());
  }
  EXPECT_THROW(parse_method("lrp"), ValidationError);
  EXPECT_THROW(input_x_gradient(net, x, 2), ValidationError);
  EXPECT_THROW(input_x_gradient(net, Tensor({1, 4, 4, 3}), 0), ShapeError);
}

TEST(MapIo, RoundTrip) {
  TempDir dir("maps");
  AttributionMap m;
  m.header.dims = {2, 2, 2};
  m.values = {0, 1, 2, 3, 4, 5, 6, 7};
  m.method = Method::guided_gradcam;
  m.target = 1;
  m.subject = "sub-007";
  write_map(m, dir / "m.xvol");
  const AttributionMap back = read_map(dir / "m.xvol");
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(back.method, m.method);
  EXPECT_EQ(back.target, 1u);
  EXPECT_EQ(back.subject, "sub-007");
}

TEST(Globalize, IdenticalMapsAreDegenerate) {
  const std::vector<float> common{0.0f, 0.25f, 1.0f, 0.5f, 0.75f, 0.1f};
  std::vector<MethodMaps> cohort;
  for (Method m : {Method::input_x_gradient, Method::guided_backprop}) cohort.push_back({m, {common, common, common}, 0.3});
  const auto r = globalize(cohort, 3);
  EXPECT_NEAR(r.explained_variance_ratio[0], 0.0, 1e-12);
  for (std::size_t i = 0; i < common.size(); ++i) EXPECT_NEAR(r.weighted_average[i], common[i], 1e-6);
}

TEST(Globalize, WeightEndpoint) {
  std::mt19937_64 rng(17);
  auto maps = [&] {
    std::vector<std::vector<float>> out;
    for (int i = 0; i < 3; ++i) out.push_back(random_tensor({10}, rng).storage());
    return out;
  };
  const auto r = globalize({{Method::input_x_gradient, maps(), 0.8}, {Method::kernel_shap, maps(), -0.2}}, 2);
  EXPECT_DOUBLE_EQ(r.weights[0], 1.0);
  EXPECT_DOUBLE_EQ(r.weights[1], 0.0);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(r.weighted_average[i], r.method_means[0][i], 1e-6);

  const auto u = globalize({{Method::input_x_gradient, maps(), -1.0}, {Method::kernel_shap, maps(), 0.0}}, 2);
  EXPECT_DOUBLE_EQ(u.weights[0], 0.5);
}

TEST(Globalize, TwoClustersSplitByFirstScore) {
  std::mt19937_64 rng(18);
  std::normal_distribution<float> noise(0.0f, 0.02f);
  std::vector<std::vector<float>> a, b;
  for (int i = 0; i < 6; ++i) {
    std::vector<float> ma(20), mb(20);
    for (std::size_t v = 0; v < 20; ++v) {
      ma[v] = (v < 10 ? 1.0f : 0.0f) + noise(rng);
      mb[v] = (v < 10 ? 0.0f : 1.0f) + noise(rng);
    }
    a.push_back(ma);
    b.push_back(mb);
  }
  const auto r = globalize({{Method::input_x_gradient, a, 0.5}, {Method::guided_backprop, b, 0.5}}, 2);
  const float sign = r.scores(0, 0) > 0 ? 1.0f : -1.0f;
  for (int i = 0; i < 6; ++i) EXPECT_GT(sign * r.scores(i, 0), 0.0f);
  for (int i = 6; i < 12; ++i) EXPECT_LT(sign * r.scores(i, 0), 0.0f);
  for (const auto& n : r.normalized) {
    EXPECT_FLOAT_EQ(*std::min_element(n.begin(), n.end()), 0.0f);
    EXPECT_FLOAT_EQ(*std::max_element(n.begin(), n.end()), 1.0f);
  }
}

TEST(Globalize, RejectsTooFewMaps) {
  EXPECT_THROW(globalize({{Method::input_x_gradient, {{1, 2}, {2, 1}}, 0.1}}, 1), ValidationError);
}
