#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace survxai::models {

struct ReconstructionMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double msm = 0.0;  // mean(r^2)
};

// Residual r = reconstructed - original.
ReconstructionMetrics reconstruction_metrics(std::span<const float> original, std::span<const float> reconstructed);

struct ClassificationMetrics {
  double f1 = 0.0;
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double precision = 0.0;
  // Set when a ratio had a zero denominator and was reported as 0.
  bool f1_undefined = false;
  bool sensitivity_undefined = false;
  bool precision_undefined = false;
};

// Labels and predictions are class indices; 1 (shorter-term survival) is positive.
ClassificationMetrics classification_metrics(std::span<const int> labels, std::span<const int> predictions);

struct FoldMetrics {
  std::string fold;
  double train_loss = 0.0;
  double val_loss = 0.0;
  ReconstructionMetrics reconstruction;
  ClassificationMetrics classification;
};

struct MetricsReport {
  std::vector<FoldMetrics> folds;

  // Mean and population standard deviation over folds.
  FoldMetrics mean() const;
  FoldMetrics stddev() const;

  // fold,train_loss,val_loss,rmse,mae,msm,f1,accuracy,sensitivity,precision; then "mean" and "std" rows.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

}  // namespace survxai::models
