#include "survxai/latent/pca.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <cstring>

#include "survxai/error.hpp"
#include "survxai/util/format.hpp"

namespace survxai::latent {
namespace {

using util::fnv1a;

std::uint64_t basis_fingerprint(const PCABasis& b) {
  std::uint64_t h = fnv1a(b.mean.data(), b.mean.size() * sizeof(float));
  return fnv1a(b.components.data(), static_cast<std::size_t>(b.components.size()) * sizeof(float), h);
}

struct CenteredSvd {
  Eigen::VectorXd mean;
  Eigen::VectorXd singular;
  Eigen::MatrixXd v;  // voxels x r
  double total_variance = 0.0;
};

CenteredSvd centered_svd(const RowMatrix& data) {
  CenteredSvd out;
  out.mean = data.cast<double>().colwise().mean().transpose();
  // Work on the transposed (voxels x subjects) matrix so the SVD stays thin.
  Eigen::MatrixXd xt = data.cast<double>().transpose();
  xt.colwise() -= out.mean;
  out.total_variance = xt.squaredNorm();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(xt, Eigen::ComputeThinU);
  out.singular = svd.singularValues();
  out.v = svd.matrixU();
  return out;
}

}  // namespace

PCABasis PCABasis::truncated(std::size_t k) const {
  if (k < 1 || k > this->k()) {
    throw ValidationError("cannot truncate a " + std::to_string(this->k()) + "-component basis to " +
                          std::to_string(k));
  }
  PCABasis b;
  b.mean = mean;
  b.components = components.topRows(static_cast<Eigen::Index>(k));
  b.explained_variance_ratio.assign(explained_variance_ratio.begin(), explained_variance_ratio.begin() + k);
  b.singular_values.assign(singular_values.begin(), singular_values.begin() + k);
  b.fingerprint = basis_fingerprint(b);
  return b;
}

std::vector<float> PCABasis::component(std::size_t i) const {
  if (i >= k()) throw ValidationError("component index out of range");
  const auto row = components.row(static_cast<Eigen::Index>(i));
  return std::vector<float>(row.data(), row.data() + row.size());
}

PCABasis fit_pca(const RowMatrix& data, std::size_t k) {
  const std::size_t n = static_cast<std::size_t>(data.rows()), p = static_cast<std::size_t>(data.cols());
  if (n < 2) throw ValidationError("PCA needs at least 2 rows, got " + std::to_string(n));
  const std::size_t kmax = std::min(n - 1, p);
  if (k < 1 || k > kmax) {
    throw ValidationError("PCA component count " + std::to_string(k) + " outside [1, " + std::to_string(kmax) + "]");
  }
  const CenteredSvd svd = centered_svd(data);
  PCABasis b;
  b.mean.resize(p);
  for (std::size_t j = 0; j < p; ++j) b.mean[j] = static_cast<float>(svd.mean(static_cast<Eigen::Index>(j)));
  b.components.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < k; ++i) {
    Eigen::VectorXd v = svd.v.col(static_cast<Eigen::Index>(i));
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    b.components.row(static_cast<Eigen::Index>(i)) = v.transpose().cast<float>();
    const double s = svd.singular(static_cast<Eigen::Index>(i));
    b.singular_values.push_back(s);
    b.explained_variance_ratio.push_back(svd.total_variance > 0.0 ? s * s / svd.total_variance : 0.0);
  }
  b.fingerprint = basis_fingerprint(b);
  return b;
}

PCABasis fit_pca(const CohortMatrix& m, std::size_t k) { return fit_pca(m.data, k); }

std::vector<double> explained_variance_spectrum(const RowMatrix& data) {
  if (data.rows() < 2) throw ValidationError("variance spectrum needs at least 2 rows");
  const CenteredSvd svd = centered_svd(data);
  const std::size_t kmax = std::min<std::size_t>(static_cast<std::size_t>(data.rows()) - 1,
                                                 static_cast<std::size_t>(data.cols()));
  std::vector<double> ratios;
  for (std::size_t i = 0; i < kmax; ++i) {
    const double s = svd.singular(static_cast<Eigen::Index>(i));
    ratios.push_back(svd.total_variance > 0.0 ? s * s / svd.total_variance : 0.0);
  }
  return ratios;
}

std::size_t select_k_from_spectrum(const std::vector<double>& ratios, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ValidationError("variance threshold must be in (0, 1]");
  if (ratios.empty()) throw ValidationError("empty variance spectrum");
  double cumulative = 0.0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    cumulative += ratios[k];
    if (cumulative > threshold) return k + 1;
  }
  // A threshold of exactly 1 is met as soon as the spectrum is exhausted up to rounding.
  cumulative = 0.0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    cumulative += ratios[k];
    if (cumulative >= threshold - 1e-9) return k + 1;
  }
  return ratios.size();
}

std::size_t select_k_by_variance(const CohortMatrix& m, double threshold) {
  return select_k_from_spectrum(explained_variance_spectrum(m.data), threshold);
}

ProjectedSubgroup project(const RowMatrix& data, const PCABasis& basis) {
  if (static_cast<std::size_t>(data.cols()) != basis.voxels()) {
    throw ShapeError("cannot project " + std::to_string(data.cols()) + "-voxel rows onto a " +
                     std::to_string(basis.voxels()) + "-voxel basis");
  }
  ProjectedSubgroup out;
  out.basis_fingerprint = basis.fingerprint;
  const Eigen::RowVectorXf mu = Eigen::Map<const Eigen::RowVectorXf>(basis.mean.data(), basis.mean.size());
  RowMatrix centered = data.rowwise() - mu;
  out.scores = centered * basis.components.transpose();
  out.mean_scores.assign(basis.k(), 0.0);
  for (Eigen::Index r = 0; r < out.scores.rows(); ++r)
    for (std::size_t i = 0; i < basis.k(); ++i) out.mean_scores[i] += out.scores(r, static_cast<Eigen::Index>(i));
  if (out.scores.rows() > 0) {
    for (double& v : out.mean_scores) v /= static_cast<double>(out.scores.rows());
  }
  return out;
}

ProjectedSubgroup project(const CohortMatrix& m, const PCABasis& basis) { return project(m.data, basis); }

RowMatrix reconstruct(const RowMatrix& scores, const PCABasis& basis) {
  if (static_cast<std::size_t>(scores.cols()) != basis.k()) throw ShapeError("score width does not match basis");
  const Eigen::RowVectorXf mu = Eigen::Map<const Eigen::RowVectorXf>(basis.mean.data(), basis.mean.size());
  RowMatrix out = scores * basis.components;
  out.rowwise() += mu;
  return out;
}

}  // namespace survxai::latent
