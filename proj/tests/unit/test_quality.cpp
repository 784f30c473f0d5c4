#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "survxai/error.hpp"
#include "survxai/quality/quality.hpp"
#include "test_models.hpp"

using namespace survxai;
using namespace survxai::quality;
using namespace survxai::testing;

namespace {

// Mean-absolute-difference form of the Gini index.
double gini_oracle(const std::vector<float>& g) {
  double sum = 0.0, diff = 0.0;
  for (float a : g) sum += std::abs(a);
  for (float a : g)
    for (float b : g) diff += std::abs(std::abs(static_cast<double>(a)) - std::abs(static_cast<double>(b)));
  return diff / (2.0 * static_cast<double>(g.size()) * sum);
}

double ssim_oracle(const std::vector<float>& x, const std::vector<float>& y, double c1, double c2) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double vx = 0, vy = 0, cxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    vx += (x[i] - mx) * (x[i] - mx) / n;
    vy += (y[i] - my) * (y[i] - my) / n;
    cxy += (x[i] - mx) * (y[i] - my) / n;
  }
  return (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i] / n, mb += b[i] / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

std::vector<float> random_vec(std::size_t n, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  return random_tensor({n}, rng, lo, hi).storage();
}

std::vector<float> w_times_x(const LinearModel& m, const Tensor& x, std::size_t target, float sign = 1.0f) {
  std::vector<float> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = sign * m.weight(target, i) * x[i];
  return g;
}

// Worst relative error of an analytic gradient against central differences.
double fd_error(const std::function<double(const std::vector<float>&)>& f, std::vector<float> x,
                const std::vector<float>& grad, float h = 1e-3f) {
  double worst = 0.0, scale = 1e-6;
  for (float v : grad) scale = std::max(scale, static_cast<double>(std::abs(v)));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    const float step_up = x[i] - keep;
    x[i] = keep - h;
    const double dn = f(x);
    const float step_dn = keep - x[i];
    x[i] = keep;
    const double fd = (up - dn) / (static_cast<double>(step_up) + step_dn);
    worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST(Pearson, MatchesOracleAndRejectsConstants) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(30), b(30);
    for (std::size_t i = 0; i < 30; ++i) a[i] = n(rng), b[i] = 0.5 * a[i] + n(rng);
    EXPECT_NEAR(pearson(a, b), pearson_oracle(a, b), 1e-12);
  }
  const std::vector<double> c(5, 2.0), v{1, 2, 3, 4, 5};
  EXPECT_THROW(pearson(c, v), DegenerateVariance);
  EXPECT_THROW(pearson(v, c), DegenerateVariance);
}

TEST(Subsets, SizeDistinctDeterministic) {
  FaithfulnessConfig cfg;
  EXPECT_EQ(cfg.n_perturbations, 20u);
  cfg.seed = 4;
  const auto a = draw_subsets(95, cfg);
  ASSERT_EQ(a.size(), 20u);
  for (const auto& s : a) {
    EXPECT_EQ(s.size(), 10u);  // ceil(9.5)
    EXPECT_EQ(std::set<std::uint32_t>(s.begin(), s.end()).size(), s.size());
    for (auto i : s) EXPECT_LT(i, 95u);
  }
  EXPECT_EQ(a, draw_subsets(95, cfg));
  cfg.seed = 5;
  EXPECT_NE(a, draw_subsets(95, cfg));
  cfg.subset_fraction = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Faithfulness, LinearOracleIsExactlyOne) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = LinearModel::random(40, 2, rng);
    const Tensor x = random_tensor({40}, rng);
    FaithfulnessConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    cfg.subset_fraction = 0.05 + 0.01 * trial;
    EXPECT_NEAR(faithfulness(m, w_times_x(m, x, 1), x, 1, cfg), 1.0, 1e-6);
    EXPECT_NEAR(faithfulness(m, w_times_x(m, x, 1, -1.0f), x, 1, cfg), -1.0, 1e-6);
  }
}

TEST(Faithfulness, ConstantModelIsDegenerate) {
  std::mt19937_64 rng(3);
  const ConstantModel m(12);
  const Tensor x = random_tensor({12}, rng);
  EXPECT_THROW(faithfulness(m, random_vec(12, rng), x, 0, {}), DegenerateVariance);
}

TEST(Faithfulness, ScaleInvariantAndDeterministic) {
  std::mt19937_64 rng(4);
  const ReluNet net(30, 10, 2, rng);
  const Tensor x = random_tensor({30}, rng);
  auto g = random_vec(30, rng);
  const FaithfulnessConfig cfg{20, 0.2, 7};
  const double f = faithfulness(net, g, x, 1, cfg);
  EXPECT_DOUBLE_EQ(f, faithfulness(net, g, x, 1, cfg));
  for (float& v : g) v *= 3.5f;
  EXPECT_NEAR(faithfulness(net, g, x, 1, cfg), f, 1e-6);
  EXPECT_LE(std::abs(f), 1.0);
}

TEST(Faithfulness, DropsMatchDirectEvaluation) {
  std::mt19937_64 rng(5);
  const ReluNet net(10, 6, 2, rng);
  const Tensor x = random_tensor({10}, rng);
  const auto subsets = draw_subsets(10, {5, 0.3, 1});
  const auto drops = output_drops(net, x, 0, subsets);
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    Tensor masked = x;
    for (auto i : subsets[k]) masked[i] = 0.0f;
    EXPECT_NEAR(drops[k], logit(net, x, 0) - logit(net, masked, 0), 1e-5);
  }
}

TEST(Faithfulness, CohortIsMeanOfSubjects) {
  std::mt19937_64 rng(6);
  const ReluNet net(20, 8, 2, rng);
  std::vector<Tensor> xs;
  for (int s = 0; s < 4; ++s) xs.push_back(random_tensor({20}, rng));
  std::vector<const Tensor*> ptrs;
  for (const auto& x : xs) ptrs.push_back(&x);
  const auto g = random_vec(20, rng);
  const FaithfulnessConfig cfg{20, 0.2, 11};
  EXPECT_EQ(subject_seed(11, 0), 11u);
  double mean = 0.0;
  for (std::size_t s = 0; s < 4; ++s) {
    FaithfulnessConfig c = cfg;
    c.seed = subject_seed(cfg.seed, s);
    mean += faithfulness(net, g, xs[s], 1, c) / 4.0;
  }
  EXPECT_NEAR(cohort_faithfulness(net, g, ptrs, 1, cfg), mean, 1e-9);

  const auto probe = FaithfulnessProbe::build(net, ptrs, 1, cfg);
  EXPECT_EQ(probe.subset_count(), 20u);
  EXPECT_NEAR(probe.evaluate(g), mean, 1e-9);
}

TEST(Faithfulness, ProbeGradientMatchesDifferences) {
  std::mt19937_64 rng(7);
  const ReluNet net(16, 8, 2, rng);
  std::vector<Tensor> xs;
  for (int s = 0; s < 3; ++s) xs.push_back(random_tensor({16}, rng));
  const std::vector<const Tensor*> ptrs{&xs[0], &xs[1], &xs[2]};
  const auto probe = FaithfulnessProbe::build(net, ptrs, 0, {12, 0.25, 3});
  const std::vector<std::size_t> which{0, 2, 3, 5, 7, 8, 11};
  const auto g = random_vec(16, rng);
  std::vector<float> grad;
  const double value = probe.evaluate_with_gradient(g, which, grad);
  EXPECT_NEAR(value, probe.evaluate(g, which), 1e-12);
  EXPECT_LE(fd_error([&](const std::vector<float>& v) { return probe.evaluate(v, which); }, g, grad), 2e-3);
}

TEST(Sparseness, AnalyticCases) {
  EXPECT_NEAR(sparseness(std::vector<float>{0.25f, 0.25f, 0.25f, 0.25f}), 0.0, 1e-12);
  EXPECT_NEAR(sparseness(std::vector<float>{0.0f, 0.0f, 1.0f, 0.0f}), 0.75, 1e-12);
  EXPECT_NEAR(sparseness(std::vector<float>{1.0f, 3.0f}), 0.25, 1e-12);
  EXPECT_NEAR(sparseness(std::vector<float>{-1.0f, 3.0f}), 0.25, 1e-12);
  EXPECT_THROW(sparseness(std::vector<float>(3, 0.0f)), ValidationError);
}

TEST(Sparseness, OracleAndInvariances) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> len(1, 64);
  std::uniform_real_distribution<float> scale(0.01f, 100.0f);
  for (int trial = 0; trial < 1000; ++trial) {
    auto g = random_vec(len(rng), rng);
    const double s = sparseness(g);
    EXPECT_NEAR(s, gini_oracle(g), 1e-6);
    EXPECT_GE(s, -1e-12);
    EXPECT_LE(s, 1.0 - 1.0 / static_cast<double>(g.size()) + 1e-9);
    auto scaled = g;
    const float a = scale(rng);
    for (float& v : scaled) v *= a;
    EXPECT_NEAR(sparseness(scaled), s, 1e-6);
    std::shuffle(g.begin(), g.end(), rng);
    EXPECT_NEAR(sparseness(g), s, 1e-6);
  }
}

TEST(Sparseness, GradientMatchesDifferences) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    // Well-separated positive values so no step changes the sort order.
    std::vector<float> g(12);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.1f + 0.05f * static_cast<float>(i);
    std::shuffle(g.begin(), g.end(), rng);
    EXPECT_LE(fd_error([](const std::vector<float>& v) { return sparseness(v); }, g, sparseness_gradient(g)), 1e-3);
  }
}

TEST(Ssim, AnalyticCases) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vec(50, rng);
    EXPECT_EQ(ssim(x, x), 1.0);
  }
  const std::vector<float> zeros(64, 0.0f), ones(64, 1.0f);
  EXPECT_NEAR(ssim(zeros, ones), 1e-4 / (1.0 + 1e-4), 1e-6);
  EXPECT_NEAR(ssim(zeros, ones), 1.0e-4, 1e-6);
}

TEST(Ssim, OracleSymmetryBounds) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = random_vec(40, rng, 0.0f, 1.0f), y = random_vec(40, rng, 0.0f, 1.0f);
    const double s = ssim(x, y);
    EXPECT_NEAR(s, ssim_oracle(x, y, kSsimC1, kSsimC2), 1e-9);
    EXPECT_DOUBLE_EQ(s, ssim(y, x));
    EXPECT_LE(std::abs(s), 1.0 + 1e-6);
  }
  std::vector<float> x(10), y(10);
  for (std::size_t i = 0; i < 10; ++i) x[i] = 0.5f + 0.04f * i, y[i] = 0.5f - 0.04f * i;
  EXPECT_LT(ssim(x, y), 0.0);
}

TEST(Ssim, GradientMatchesDifferences) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vec(30, rng, 0.0f, 1.0f), y = random_vec(30, rng, 0.0f, 1.0f);
    EXPECT_LE(fd_error([&](const std::vector<float>& v) { return ssim(v, y); }, x, ssim_gradient(x, y)), 2e-3);
  }
}

TEST(MapCompare, Residuals) {
  const std::vector<float> ref{0.0f, 1.0f, 2.0f, 3.0f};
  const auto same = map_compare(ref, ref);
  EXPECT_EQ(same.rmse, 0.0);
  EXPECT_EQ(same.mae, 0.0);
  EXPECT_EQ(same.msm, 0.0);
  const std::vector<float> g{1.0f, 1.0f, 0.0f, 3.0f};  // residuals 1, 0, -2, 0
  const auto r = map_compare(g, ref);
  EXPECT_NEAR(r.mae, 0.75, 1e-12);
  EXPECT_NEAR(r.msm, 1.25, 1e-12);
  EXPECT_NEAR(r.rmse, std::sqrt(1.25), 1e-12);
  EXPECT_THROW(map_compare(g, std::vector<float>(3)), ShapeError);
}

TEST(QualityReport, CsvLayout) {
  QualityReport rep;
  rep.rows.push_back({"optimized", 0.5, 0.25, 0.75, {0.1, 0.2, 0.01}});
  const std::string csv = rep.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "name,rmse,mae,msm,sparseness,faithfulness,ssim");
  EXPECT_NE(csv.find("optimized,"), std::string::npos);
}
