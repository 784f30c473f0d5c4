#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "survxai/io/normalize.hpp"
#include "survxai/io/volume.hpp"
#include "survxai/models/metrics.hpp"
#include "survxai/models/networks.hpp"

namespace survxai::models {

enum class Strategy { freeze, unfreeze, full };
enum class Schedule { constant, step };

std::string to_string(Strategy s);
std::string to_string(Schedule s);
Strategy parse_strategy(const std::string& s);
Schedule parse_schedule(const std::string& s);

struct TrainConfig {
  double learning_rate = 5e-4;
  AdamConfig adam;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  Schedule schedule = Schedule::constant;  // step: x0.1 every 100 epochs
  Strategy strategy = Strategy::unfreeze;
  std::uint64_t seed = 0;
  bool augment = false;
  io::AugmentConfig augmentation;
  std::size_t folds = 5;  // 0 or 1: train on everything, validate on the training set
  std::size_t batch_size = 2;

  void validate() const;
  double learning_rate_at(std::size_t epoch) const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double best_val_loss = 0.0;
  double learning_rate = 0.0;
};

struct FoldRun {
  std::vector<EpochRecord> trace;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
};

// 1 - global SSIM per sample, averaged over the batch; also returns d loss / d reconstruction.
double ssim_loss(const Tensor& reconstruction, const Tensor& target, Tensor* grad = nullptr);
// Mean sparse categorical cross-entropy of logits [N, 2]; also returns d loss / d logits.
double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad = nullptr);

struct UnsupervisedResult {
  Autoencoder model;  // best-validation fold
  MetricsReport report;
  std::vector<FoldRun> runs;
  std::size_t best_fold = 0;
};

// Volumes must be on the spec's input grid. Folds are plain k-fold over volumes.
UnsupervisedResult train_unsupervised(const std::vector<io::Volume>& volumes, const AutoencoderSpec& spec,
                                      const TrainConfig& cfg);

struct LabeledVolume {
  io::Volume volume;
  int label = 0;  // 1 = shorter-term survival
  std::string subject;
};

struct ClassifierResult {
  Classifier model;  // best-validation fold
  MetricsReport report;
  std::vector<FoldRun> runs;
  std::size_t best_fold = 0;
};

// Stratified k-fold by subject. strategy freeze/unfreeze start from `pretrained`;
// full re-initializes the encoder.
ClassifierResult train_classifier(const std::vector<LabeledVolume>& data, const ClassifierSpec& spec,
                                  const TrainConfig& cfg, const Encoder* pretrained = nullptr);

// Subject-level stratified fold assignment (fold index per sample).
std::vector<std::size_t> stratified_folds(const std::vector<LabeledVolume>& data, std::size_t folds,
                                          std::uint64_t seed);

std::vector<int> predict(const Classifier& model, const std::vector<io::Volume>& volumes, std::size_t batch = 8);

}  // namespace survxai::models
