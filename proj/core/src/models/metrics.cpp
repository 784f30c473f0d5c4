#include "survxai/models/metrics.hpp"

#include <cmath>
#include <functional>

#include "survxai/error.hpp"
#include "survxai/util/format.hpp"

namespace survxai::models {

ReconstructionMetrics reconstruction_metrics(std::span<const float> original, std::span<const float> reconstructed) {
  if (original.size() != reconstructed.size()) {
    throw ShapeError("reconstruction metrics: " + std::to_string(original.size()) + " vs " +
                     std::to_string(reconstructed.size()) + " voxels");
  }
  if (original.empty()) throw ValidationError("reconstruction metrics of empty volumes");
  double sq = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double r = static_cast<double>(reconstructed[i]) - original[i];
    sq += r * r;
    ab += std::abs(r);
  }
  const double n = static_cast<double>(original.size());
  ReconstructionMetrics m;
  m.msm = sq / n;
  m.rmse = std::sqrt(m.msm);
  m.mae = ab / n;
  return m;
}

ClassificationMetrics classification_metrics(std::span<const int> labels, std::span<const int> predictions) {
  if (labels.size() != predictions.size()) throw ShapeError("labels and predictions differ in length");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool y = labels[i] == 1, p = predictions[i] == 1;
    if (y && p) ++tp;
    else if (!y && p) ++fp;
    else if (y && !p) ++fn;
    else ++tn;
  }
  ClassificationMetrics m;
  const auto ratio = [](double num, double den, bool& undefined) {
    undefined = den == 0.0;
    return undefined ? 0.0 : num / den;
  };
  bool unused = false;
  m.accuracy = ratio(static_cast<double>(tp + tn), static_cast<double>(labels.size()), unused);
  m.sensitivity = ratio(static_cast<double>(tp), static_cast<double>(tp + fn), m.sensitivity_undefined);
  m.precision = ratio(static_cast<double>(tp), static_cast<double>(tp + fp), m.precision_undefined);
  m.f1 = ratio(2.0 * static_cast<double>(tp), static_cast<double>(2 * tp + fp + fn), m.f1_undefined);
  return m;
}

namespace {

using Field = std::function<double&(FoldMetrics&)>;

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      [](FoldMetrics& m) -> double& { return m.train_loss; },
      [](FoldMetrics& m) -> double& { return m.val_loss; },
      [](FoldMetrics& m) -> double& { return m.reconstruction.rmse; },
      [](FoldMetrics& m) -> double& { return m.reconstruction.mae; },
      [](FoldMetrics& m) -> double& { return m.reconstruction.msm; },
      [](FoldMetrics& m) -> double& { return m.classification.f1; },
      [](FoldMetrics& m) -> double& { return m.classification.accuracy; },
      [](FoldMetrics& m) -> double& { return m.classification.sensitivity; },
      [](FoldMetrics& m) -> double& { return m.classification.precision; },
  };
  return f;
}

std::string row(FoldMetrics m) {
  std::vector<std::string> cells{m.fold};
  for (const Field& f : fields()) cells.push_back(util::fmt_double(f(m)));
  return util::csv_row(cells);
}

}  // namespace

FoldMetrics MetricsReport::mean() const {
  if (folds.empty()) throw ValidationError("metrics report has no folds");
  FoldMetrics out;
  out.fold = "mean";
  for (const Field& f : fields()) {
    double acc = 0.0;
    for (FoldMetrics m : folds) acc += f(m);
    f(out) = acc / static_cast<double>(folds.size());
  }
  return out;
}

FoldMetrics MetricsReport::stddev() const {
  FoldMetrics mu = mean();
  FoldMetrics out;
  out.fold = "std";
  for (const Field& f : fields()) {
    double acc = 0.0;
    for (FoldMetrics m : folds) acc += (f(m) - f(mu)) * (f(m) - f(mu));
    f(out) = std::sqrt(acc / static_cast<double>(folds.size()));
  }
  return out;
}

std::string MetricsReport::to_csv() const {
  std::string out = "fold,train_loss,val_loss,rmse,mae,msm,f1,accuracy,sensitivity,precision\n";
  for (const FoldMetrics& m : folds) out += row(m);
  out += row(mean());
  out += row(stddev());
  return out;
}

void MetricsReport::write_csv(const std::filesystem::path& path) const { util::write_text(path, to_csv()); }

}  // namespace survxai::models
