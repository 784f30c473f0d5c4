#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "survxai/attribution/attribution.hpp"
#include "survxai/globalopt/globalopt.hpp"
#include "survxai/models/networks.hpp"
#include "survxai/models/train.hpp"
#include "survxai/pipeline/synthetic.hpp"
#include "survxai/quality/quality.hpp"

namespace survxai::pipeline {

enum class StageId { gen, phase1, train_unsup, train_clf, explain, globalize, optimize, evaluate, report };

inline constexpr std::array<StageId, 9> kAllStages = {StageId::gen,       StageId::phase1,   StageId::train_unsup,
                                                      StageId::train_clf, StageId::explain,  StageId::globalize,
                                                      StageId::optimize,  StageId::evaluate, StageId::report};

// CLI spelling: gen, phase1, train-unsup, ...
std::string to_string(StageId s);
StageId parse_stage_id(const std::string& s);

// Offsets added to the global seed so every stage draws from its own stream.
inline constexpr std::uint64_t kSeedOffsetAutoencoder = 100;
inline constexpr std::uint64_t kSeedOffsetClassifier = 200;
inline constexpr std::uint64_t kSeedOffsetExplain = 300;
inline constexpr std::uint64_t kSeedOffsetFaithfulness = 400;
inline constexpr std::uint64_t kSeedOffsetOptimizer = 500;

struct Phase1Config {
  double variance_threshold = 0.8;
  std::size_t max_components = 8;
};

struct ExplainConfig {
  std::vector<attribution::Method> methods{attribution::kAllMethods.begin(), attribution::kAllMethods.end()};
  std::size_t target = 1;
  std::string group = "shorter";  // longer, shorter or all
  attribution::MethodOptions options;
  std::size_t n_components = 3;
};

struct GridConfig {
  bool enabled = false;
  std::vector<globalopt::LossWeights> weights;  // empty: default grid
  std::vector<double> learning_rates;           // empty: default rates
};

struct PipelineConfig {
  std::uint64_t seed = 42;
  std::filesystem::path out_dir = "survxai_out";
  std::filesystem::path manifest;  // empty: <out>/cohort/manifest.csv written by gen
  std::filesystem::path atlas;     // empty: <out>/cohort/atlas.xvol
  std::array<bool, 9> enabled{true, true, true, true, true, true, true, true, true};  // per kAllStages, for run_all

  SyntheticSpec synthetic;
  Phase1Config phase1;
  models::AutoencoderSpec autoencoder;
  models::TrainConfig autoencoder_training;
  models::ClassifierSpec classifier;
  models::TrainConfig classifier_training;
  ExplainConfig explain;
  quality::FaithfulnessConfig faithfulness;
  globalopt::OptConfig optimizer;
  GridConfig grid;

  // The built-in defaults sized for the 32^3 synthetic cohort.
  static PipelineConfig defaults();

  std::filesystem::path manifest_path() const;
  std::filesystem::path atlas_path() const;
  std::filesystem::path stage_dir(StageId s) const;

  // Copies of the module configs with their stage seeds applied.
  SyntheticSpec synthetic_effective() const;
  models::TrainConfig autoencoder_effective() const;
  models::TrainConfig classifier_effective() const;
  attribution::MethodOptions explain_effective() const;
  quality::FaithfulnessConfig faithfulness_effective() const;
  globalopt::OptConfig optimizer_effective() const;

  // Value checks of every section; input paths are checked by the stages that read them.
  void validate() const;
};

// JSON text; absent keys keep their defaults, unknown keys are rejected.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
std::string to_json(const PipelineConfig& cfg);

}  // namespace survxai::pipeline
