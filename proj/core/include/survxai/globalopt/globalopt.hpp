#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "survxai/io/volume.hpp"
#include "survxai/models/nn.hpp"
#include "survxai/quality/quality.hpp"

namespace survxai::globalopt {

using tensor::DifferentiableModel;
using tensor::Tensor;

// aligned: 1 - ssim (rewards similarity to the structural reference);
// as_written: +ssim, the literal sum in the loss formula.
enum class SimilarityTerm { aligned, as_written };
// penalized: +sparseness, as written; rewarded: 1 - sparseness.
enum class SparsenessTerm { penalized, rewarded };

std::string to_string(SimilarityTerm t);
std::string to_string(SparsenessTerm t);
SimilarityTerm parse_similarity(const std::string& s);
SparsenessTerm parse_sparseness(const std::string& s);

struct LossWeights {
  double l1 = 0.4;  // 1 / faithfulness
  double l2 = 0.3;  // sparseness
  double l3 = 0.3;  // similarity

  // Non-negative and summing to 1 (within 1e-9).
  void validate() const;
};

struct LossOptions {
  LossWeights weights;
  SimilarityTerm similarity = SimilarityTerm::aligned;
  SparsenessTerm sparseness = SparsenessTerm::penalized;
  double faith_floor = 1e-3;
};

struct LossComponents {
  double faithfulness = 0.0;
  double sparseness = 0.0;
  double ssim = 0.0;
  double total = 0.0;
};

// l1 / max(faithfulness, floor) + l2 * sparseness term + l3 * similarity term.
double combine_loss(double faithfulness, double sparseness, double ssim, const LossOptions& opts);

// Loss of map x against reference y, with faithfulness from a precomputed probe
// (all of its subsets when `which` is empty).
LossComponents total_loss(std::span<const float> x, std::span<const float> y, const quality::FaithfulnessProbe& probe,
                          const LossOptions& opts, std::span<const std::size_t> which = {});
// As above, also d total / d x.
LossComponents total_loss_with_gradient(std::span<const float> x, std::span<const float> y,
                                        const quality::FaithfulnessProbe& probe, const LossOptions& opts,
                                        std::span<const std::size_t> which, std::vector<float>& grad);

struct OptimizerInputs {
  io::VolumeHeader header;
  std::array<std::vector<float>, 4> maps;  // PCs 1-3 of the cohort saliency maps, weighted average
  std::vector<float> reference;            // min-max normalized first structural component
  const DifferentiableModel* model = nullptr;
  std::vector<Tensor> subjects;            // evaluation samples
  std::size_t target = 1;

  void validate() const;
};

struct OptConfig {
  LossOptions loss;
  double learning_rate = 5e-5;
  models::AdamConfig adam;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t patience_start = 50;  // early stopping only considered from this epoch on
  std::size_t steps_per_epoch = 5;
  std::size_t subsets_per_epoch = 20;  // per subject, frozen for the epoch
  std::size_t train_pool = 0;          // per-subject training subsets drawn once; 0 draws afresh every epoch
  std::size_t probe_pool = 200;        // held-out subsets for the trace and best-epoch selection
  std::size_t subset_seed_offset = 1000003;
  std::array<std::size_t, 2> widths{8, 16};
  std::uint64_t seed = 0;
  quality::FaithfulnessConfig evaluation;  // final scoring, independent of training subsets

  void validate() const;
};

struct TraceRow {
  std::size_t epoch = 0;
  LossComponents loss;  // on the held-out probe pool
  double best_total = 0.0;
};

struct GlobalExplanation {
  io::VolumeHeader header;
  std::vector<float> values;  // in [0, 1]
  LossComponents final_loss;  // scored with cfg.evaluation
  std::vector<TraceRow> trace;
  std::size_t best_epoch = 0;
  OptConfig config;
};

// The composite-loss encoder-decoder: two conv blocks down (widths 8, 16), two up
// with skip connections, a 1x1x1 conv over [decoder, inputs] and a sigmoid.
class OptimizerNet {
 public:
  OptimizerNet(std::array<std::size_t, 3> dims, std::array<std::size_t, 2> widths, std::uint64_t seed);

  tensor::Var forward(tensor::Tape& tape, const std::vector<tensor::Var>& params, tensor::Var x) const;
  std::vector<float> predict(const Tensor& input) const;

  models::ParamStore params;

 private:
  std::array<models::Conv3dLayer, 5> convs_{};
  models::Conv3dLayer out_;
};

// Stacks the four maps into the [1, 4, D, H, W] network input.
Tensor stack_inputs(const OptimizerInputs& inputs);

GlobalExplanation optimize(const OptimizerInputs& inputs, const OptConfig& cfg);

// Faithfulness (cohort mean with cfg.evaluation), sparseness, SSIM and residuals vs the reference.
quality::QualityRow evaluate_global(std::span<const float> explanation, const OptimizerInputs& inputs,
                                    const quality::FaithfulnessConfig& cfg, const std::string& name = "global");

struct GridEntry {
  OptConfig config;
  bool aborted = false;
  std::string error;
  double ranking_loss = 0.0;  // total loss under the default weights with evaluation faithfulness
  quality::QualityRow quality;
  GlobalExplanation result;
};

// The weight combinations examined by default, including (0.4, 0.3, 0.3).
std::vector<LossWeights> default_weight_grid();
std::vector<double> default_learning_rates();

// One optimize() per (weights, lr); sorted ascending by ranking_loss, aborted runs last.
std::vector<GridEntry> grid_search(const OptimizerInputs& inputs, const std::vector<LossWeights>& weights,
                                   const std::vector<double>& learning_rates, const OptConfig& base);

// epoch,total,faithfulness,sparseness,ssim,best_total
std::string trace_csv(const std::vector<TraceRow>& trace);

}  // namespace survxai::globalopt
