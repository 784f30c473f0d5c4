#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "survxai/tensor/model.hpp"

namespace survxai::quality {

using tensor::DifferentiableModel;
using tensor::Tensor;

struct FaithfulnessConfig {
  std::size_t n_perturbations = 20;
  double subset_fraction = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t subset_size(std::size_t features) const;
};

using Subset = std::vector<std::uint32_t>;

// n_perturbations seeded draws of ceil(subset_fraction * d) distinct feature indices.
std::vector<Subset> draw_subsets(std::size_t features, const FaithfulnessConfig& cfg);

// f(x) - f(x with the subset set to the zero baseline), per subset, on the target logit.
std::vector<double> output_drops(const DifferentiableModel& model, const Tensor& x, std::size_t target,
                                 const std::vector<Subset>& subsets, std::size_t batch = 16);

// Population Pearson correlation; DegenerateVariance when either side is constant.
double pearson(std::span<const double> a, std::span<const double> b);

// corr_S( sum_{i in S} g_i , f(x) - f(x[x_S = 0]) )
double faithfulness(const DifferentiableModel& model, std::span<const float> g, const Tensor& x,
                    std::size_t target, const FaithfulnessConfig& cfg);

// Seed of subject s's subset draws; subject 0 uses `seed` itself.
std::uint64_t subject_seed(std::uint64_t seed, std::size_t subject);

// Mean per-subject faithfulness of one shared map g. Each subject draws its own
// subsets with subject_seed(cfg.seed, index).
double cohort_faithfulness(const DifferentiableModel& model, std::span<const float> g,
                           const std::vector<const Tensor*>& subjects, std::size_t target,
                           const FaithfulnessConfig& cfg);

// Output drops precomputed for fixed per-subject subsets, so the faithfulness of
// many candidate maps (and its gradient) costs no forward passes.
struct FaithfulnessProbe {
  std::size_t features = 0;
  std::vector<std::vector<Subset>> subsets;  // [subject][k]
  std::vector<std::vector<double>> drops;    // [subject][k]

  static FaithfulnessProbe build(const DifferentiableModel& model, const std::vector<const Tensor*>& subjects,
                                 std::size_t target, const FaithfulnessConfig& cfg, std::size_t batch = 16);

  std::size_t subset_count() const { return drops.empty() ? 0 : drops.front().size(); }

  // Cohort-mean faithfulness over the chosen subset indices (all when `which` is empty).
  double evaluate(std::span<const float> g, std::span<const std::size_t> which = {}) const;
  // As evaluate(), also writing d(mean faithfulness)/dg into grad.
  double evaluate_with_gradient(std::span<const float> g, std::span<const std::size_t> which,
                                std::vector<float>& grad) const;

 private:
  double evaluate_impl(std::span<const float> g, std::span<const std::size_t> which, std::vector<float>* grad) const;
};

// Gini index of |g|: 1 - 2 sum_k (v_(k)/|v|_1) (d - k + 0.5)/d, v ascending.
double sparseness(std::span<const float> g);
// Subgradient with the sort permutation held fixed.
std::vector<float> sparseness_gradient(std::span<const float> g);

inline constexpr double kSsimC1 = 1e-4;  // (0.01 L)^2, L = 1
inline constexpr double kSsimC2 = 9e-4;  // (0.03 L)^2

// Global (single-window) SSIM with population statistics.
double ssim(std::span<const float> x, std::span<const float> y, double c1 = kSsimC1, double c2 = kSsimC2);
// d ssim(x, y) / dx
std::vector<float> ssim_gradient(std::span<const float> x, std::span<const float> y, double c1 = kSsimC1,
                                 double c2 = kSsimC2);

struct ResidualStats {
  double rmse = 0.0;
  double mae = 0.0;
  double msm = 0.0;  // mean squared residual
};

// Residual r = g - reference.
ResidualStats map_compare(std::span<const float> g, std::span<const float> reference);

struct QualityRow {
  std::string name;
  double faithfulness = 0.0;
  double sparseness = 0.0;
  double ssim = 0.0;
  ResidualStats residual;
};

struct QualityReport {
  std::vector<QualityRow> rows;

  // name,rmse,mae,msm,sparseness,faithfulness,ssim
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

}  // namespace survxai::quality
