#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "survxai/io/cohort.hpp"
#include "survxai/io/volume.hpp"
#include "survxai/tensor/model.hpp"

// Local attribution methods. Every method explains the pre-softmax logit of the
// target class and uses the all-zero input as its baseline.
namespace survxai::attribution {

using tensor::BackwardMode;
using tensor::DifferentiableModel;
using tensor::Tensor;

enum class Method { input_x_gradient, integrated_gradients, gradient_shap, guided_backprop, guided_gradcam, kernel_shap };

inline constexpr std::array<Method, 6> kAllMethods = {Method::input_x_gradient, Method::integrated_gradients,
                                                      Method::gradient_shap,    Method::guided_backprop,
                                                      Method::guided_gradcam,   Method::kernel_shap};

std::string to_string(Method m);
Method parse_method(const std::string& s);

// d logit_target / d x for each sample, batched.
std::vector<Tensor> gradients(const DifferentiableModel& model, const std::vector<Tensor>& xs, std::size_t target,
                              BackwardMode mode = BackwardMode::standard, std::size_t batch = 16);
Tensor gradient(const DifferentiableModel& model, const Tensor& x, std::size_t target,
                BackwardMode mode = BackwardMode::standard);

Tensor input_x_gradient(const DifferentiableModel& model, const Tensor& x, std::size_t target);

// Right Riemann sum over t = 1/steps ... 1. A null baseline means zeros.
Tensor integrated_gradients(const DifferentiableModel& model, const Tensor& x, std::size_t target,
                            std::size_t steps = 50, const Tensor* baseline = nullptr, std::size_t batch = 16);

struct GradientShapConfig {
  std::size_t samples = 20;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
};

// Mean over draws of x (.) grad(u (x + eps)), u ~ U(0, 1), eps ~ N(0, noise_std^2).
Tensor gradient_shap(const DifferentiableModel& model, const Tensor& x, std::size_t target,
                     const GradientShapConfig& cfg = {});

Tensor guided_backprop(const DifferentiableModel& model, const Tensor& x, std::size_t target);

// Class activation map at a named capture point of a [C, D, H, W] sample,
// upsampled trilinearly to the sample grid (replicated over input channels).
Tensor grad_cam(const DifferentiableModel& model, const Tensor& x, std::size_t target, const std::string& layer);
Tensor guided_gradcam(const DifferentiableModel& model, const Tensor& x, std::size_t target,
                      const std::string& layer);

struct KernelShapConfig {
  std::size_t coalitions = 256;
  std::size_t group_size = 8;
  std::uint64_t seed = 0;
};

// Features are cubic blocks of side group_size over the spatial grid of a rank-4
// sample, or contiguous runs of group_size entries for any other sample shape.
std::vector<std::vector<std::uint32_t>> feature_groups(const tensor::Shape& sample_shape, std::size_t group_size);

// Shapley-kernel weighted least squares with the efficiency constraint
// sum(phi) = f(x) - f(0) imposed exactly. Every coalition is enumerated when
// 2^groups <= coalitions; otherwise sizes are sampled in proportion to the
// kernel. Each group's value is spread evenly over its voxels.
Tensor kernel_shap(const DifferentiableModel& model, const Tensor& x, std::size_t target,
                   const KernelShapConfig& cfg = {});

struct MethodOptions {
  std::size_t ig_steps = 32;
  GradientShapConfig gradient_shap;
  KernelShapConfig kernel_shap;
  std::string gradcam_layer = "s3";
};

Tensor attribute(Method method, const DifferentiableModel& model, const Tensor& x, std::size_t target,
                 const MethodOptions& options = {});

struct AttributionMap {
  io::VolumeHeader header;
  std::vector<float> values;
  Method method = Method::input_x_gradient;
  std::size_t target = 0;
  std::string subject;
};

// XVOL volume plus "<path>.meta" (method, target, subject lines).
void write_map(const AttributionMap& map, const std::filesystem::path& path);
AttributionMap read_map(const std::filesystem::path& path);

struct MethodMaps {
  Method method = Method::input_x_gradient;
  std::vector<std::vector<float>> maps;  // one per subject, same length
  double faithfulness = 0.0;             // quality weight
};

struct GlobalizationResult {
  io::RowMatrix components;                   // k x voxels, orthonormal rows
  std::vector<std::vector<float>> normalized;  // components min-max scaled to [0, 1]
  std::vector<double> explained_variance_ratio;
  io::RowMatrix scores;                        // pooled maps x k
  std::vector<Method> methods;
  std::vector<double> weights;                 // per method, >= 0, sum 1
  std::vector<std::vector<float>> method_means;
  std::vector<float> weighted_average;
};

// Per-subject maps are min-max normalized, pooled across methods, and reduced with
// PCA (k = min(n_components, maps - 1)). Method weights are proportional to
// max(faithfulness, 0); uniform when every weight is zero.
GlobalizationResult globalize(const std::vector<MethodMaps>& cohort, std::size_t n_components = 3);

}  // namespace survxai::attribution
