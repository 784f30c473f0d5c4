// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "op_cases.hpp"
#include "oracles.hpp"
#include "region_cases.hpp"
#include "survxai/attribution/attribution.hpp"
#include "survxai/error.hpp"
#include "survxai/latent/pca.hpp"
#include "survxai/models/train.hpp"
#include "survxai/pipeline/stages.hpp"
#include "survxai/quality/quality.hpp"
#include "test_models.hpp"

namespace fs = std::filesystem;
using namespace survxai;
using namespace survxai::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int n, const std::string& title, const Outcome& o) {
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << title << " --" << o.detail.str() << std::endl;
}

// Runs a check, turning an unexpected exception into a failure line.
template <class Fn>
void criterion(int n, const std::string& title, Fn&& fn) {
  Outcome o;
  try {
    fn(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  report(n, title, o);
}

// --- 1 -------------------------------------------------------------------

void autodiff(Outcome& o) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_op;
  const auto cases = op_cases();
  for (const auto& c : cases) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed * 7919 + 1);
      const double err = gradient_check(c.fn, c.inputs(rng), 1e-3);
      if (err > worst) worst = err, worst_op = c.name;
    }
  }
  const double t = seconds_since(t0);
  o.detail << " " << cases.size() << " ops x 100 cases, worst rel err " << worst << " (" << worst_op << "), " << t << " s";
  o.require(worst <= 1e-2, "relative error above 1e-2");
  o.require(t < 60.0, "runtime not under 1 min");
}

// --- 2 -------------------------------------------------------------------

double max_abs_diff(const Tensor& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void linear_oracle(Outcome& o) {
  using namespace attribution;
  std::map<std::string, double> worst{{"ixg", 0}, {"ig", 0}, {"ig_baseline", 0}, {"gradient_shap", 0}, {"kernel_shap", 0}};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 11);
    const std::size_t d = 4;
    const auto m = LinearModel::random(d, 2, rng);
    const Tensor x = random_tensor({d}, rng), base = random_tensor({d}, rng);
    const std::size_t target = seed % 2;
    std::vector<double> wx(d), wxb(d);
    for (std::size_t i = 0; i < d; ++i) {
      wx[i] = static_cast<double>(m.weight(target, i)) * x[i];
      wxb[i] = static_cast<double>(m.weight(target, i)) * (x[i] - base[i]);
    }
    auto track = [&](const std::string& k, double v) { worst[k] = std::max(worst[k], v); };
    track("ixg", max_abs_diff(input_x_gradient(m, x, target), wx));
    for (std::size_t steps : {2u, 3u, 7u, 50u, 256u}) {
      track("ig", max_abs_diff(integrated_gradients(m, x, target, steps), wx));
      track("ig_baseline", max_abs_diff(integrated_gradients(m, x, target, steps, &base), wxb));
    }
    track("gradient_shap", max_abs_diff(gradient_shap(m, x, target, {20, 0.0, seed}), wx));
    track("kernel_shap", max_abs_diff(kernel_shap(m, x, target, {256, 1, seed}), wx));
  }
  o.detail << " 50 models, max |err|:";
  for (const auto& [k, v] : worst) {
    o.detail << " " << k << "=" << v;
    o.require(v <= 1e-4, k + " above 1e-4");
  }
}

// --- 3 -------------------------------------------------------------------

void ig_completeness(Outcome& o) {
  // Without biases no hidden unit changes sign along the path, so the sum is exact up to rounding.
  double worst_ratio = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 300);
    const ReluNet net(8, 16, 2, rng, false);
    const Tensor x = random_tensor({8}, rng);
    const Tensor map = attribution::integrated_gradients(net, x, 1, 256);
    const auto v = map.values();
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    const double delta = logit(net, x, 1) - logit(net, Tensor({8}, 0.0f), 1);
    worst_ratio = std::max(worst_ratio, std::abs(total - delta) / (1e-3 * std::abs(delta) + 1e-5));
  }
  // With biases the step sum misses part of each kink; check it against the exact sum and its bound.
  double worst_oracle = 0.0, worst_kink = 0.0;
  int within_tolerance = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 350);
    const ReluNet net(8, 16, 2, rng);
    const Tensor x = random_tensor({8}, rng);
    const Tensor map = attribution::integrated_gradients(net, x, 1, 256);
    const auto v = map.values();
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    const double delta = logit(net, x, 1) - logit(net, Tensor({8}, 0.0f), 1);
    const auto oracle = riemann_oracle(net, x, 1, 256);
    worst_oracle = std::max(worst_oracle, std::abs(total - oracle.sum));
    worst_kink = std::max(worst_kink, std::abs(total - delta) - oracle.kink_bound);
    within_tolerance += std::abs(total - delta) <= 1e-3 * std::abs(delta) + 1e-5;
  }
  o.detail << " 50 bias-free ReLU nets at 256 steps, worst |gap| / tolerance = " << worst_ratio
           << "; 50 biased nets: |sum - step oracle| <= " << worst_oracle << ", gap - kink bound <= " << worst_kink
           << ", " << within_tolerance << "/50 within the relative tolerance";
  o.require(worst_ratio <= 1.0, "completeness gap above tolerance");
  o.require(worst_oracle <= 1e-5, "biased nets differ from the step-sum oracle");
  o.require(worst_kink <= 1e-5, "biased nets exceed the kink bound");
}

// --- 4 -------------------------------------------------------------------

void faithfulness_oracle(Outcome& o) {
  double worst_pos = 0.0, worst_neg = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed + 400);
    const std::size_t d = 10 + seed * 3;
    const auto m = LinearModel::random(d, 2, rng);
    const Tensor x = random_tensor({d}, rng);
    std::vector<float> g(d), neg(d);
    for (std::size_t i = 0; i < d; ++i) g[i] = m.weight(1, i) * x[i], neg[i] = -g[i];
    quality::FaithfulnessConfig cfg;
    cfg.seed = seed;
    cfg.subset_fraction = 0.05 + 0.3 * static_cast<double>(seed % 10) / 10.0;
    cfg.n_perturbations = 5 + seed % 30;
    worst_pos = std::max(worst_pos, std::abs(quality::faithfulness(m, g, x, 1, cfg) - 1.0));
    worst_neg = std::max(worst_neg, std::abs(quality::faithfulness(m, neg, x, 1, cfg) + 1.0));
  }
  bool degenerate = false;
  try {
    std::mt19937_64 rng(1);
    const ConstantModel c(16);
    const auto g = random_tensor({16}, rng).storage();
    quality::faithfulness(c, g, random_tensor({16}, rng), 0, {});
  } catch (const DegenerateVariance&) {
    degenerate = true;
  }
  const std::size_t n_default = quality::FaithfulnessConfig{}.n_perturbations;
  o.detail << " max |f-1|=" << worst_pos << " max |f+1|=" << worst_neg << " constant model degenerate="
           << (degenerate ? "yes" : "no") << " default n=" << n_default;
  o.require(worst_pos <= 1e-6 && worst_neg <= 1e-6, "linear oracle off by more than 1e-6");
  o.require(degenerate, "constant model did not raise DegenerateVariance");
  o.require(n_default == 20, "default perturbation count is not 20");
}

// --- 5 -------------------------------------------------------------------

void sparseness_cases(Outcome& o) {
  const double uniform = quality::sparseness(std::vector<float>{0.25f, 0.25f, 0.25f, 0.25f});
  const double onehot = quality::sparseness(std::vector<float>{0, 1, 0, 0});
  const double pair = quality::sparseness(std::vector<float>{1, 3});
  o.detail << " uniform=" << uniform << " one-hot=" << onehot << " (1,3)=" << pair;
  o.require(std::abs(uniform) <= 1e-6 && std::abs(onehot - 0.75) <= 1e-6 && std::abs(pair - 0.25) <= 1e-6,
            "analytic case mismatch");
  std::mt19937_64 rng(500);
  std::uniform_int_distribution<std::size_t> len(2, 200);
  std::uniform_real_distribution<float> scale(1e-3f, 1e3f);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto g = random_tensor({len(rng)}, rng).storage();
    const double s = quality::sparseness(g);
    auto h = g;
    const float a = scale(rng);
    for (float& v : h) v *= a;
    std::shuffle(h.begin(), h.end(), rng);
    worst = std::max(worst, std::abs(quality::sparseness(h) - s));
  }
  o.detail << "; 1000 vectors, max scale+permutation drift " << worst;
  o.require(worst <= 1e-6, "invariance drift above 1e-6");
}

// --- 6 -------------------------------------------------------------------

void ssim_cases(Outcome& o) {
  std::mt19937_64 rng(600);
  bool identity = true;
  double asym = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto x = random_tensor({64}, rng, 0.0f, 1.0f).storage(), y = random_tensor({64}, rng, 0.0f, 1.0f).storage();
    identity = identity && quality::ssim(x, x) == 1.0;
    asym = std::max(asym, std::abs(quality::ssim(x, y) - quality::ssim(y, x)));
  }
  const double c01 = quality::ssim(std::vector<float>(100, 0.0f), std::vector<float>(100, 1.0f), 1e-4, 9e-4);
  o.detail << " identity exact=" << (identity ? "yes" : "no") << " max asymmetry=" << asym << " ssim(0,1)=" << c01;
  o.require(identity, "ssim(x, x) != 1");
  o.require(asym == 0.0, "not symmetric");
  o.require(std::abs(c01 - 1.0e-4) <= 1e-6, "constant-0 vs constant-1 case");
}

// --- 7 -------------------------------------------------------------------

void pca_checks(Outcome& o) {
  using latent::RowMatrix;
  double worst_ratio = 0.0, worst_ortho = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(700 + seed);
    std::normal_distribution<float> n(0.0f, 1.0f);
    RowMatrix data(10, 50);
    for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = n(rng);
    const auto b = latent::fit_pca(data, 9);
    std::vector<double> mean(50, 0.0), cov(50 * 50, 0.0);
    for (int j = 0; j < 50; ++j) {
      for (int i = 0; i < 10; ++i) mean[j] += data(i, j) / 10.0;
    }
    for (int a = 0; a < 50; ++a)
      for (int c = 0; c < 50; ++c) {
        double s = 0.0;
        for (int i = 0; i < 10; ++i) s += (data(i, a) - mean[a]) * (data(i, c) - mean[c]);
        cov[a * 50 + c] = s / 9.0;
      }
    const auto ev = jacobi_eigenvalues(cov, 50);
    double total = 0.0;
    for (double e : ev) total += std::max(e, 0.0);
    for (std::size_t i = 0; i < 9; ++i)
      worst_ratio = std::max(worst_ratio, std::abs(b.explained_variance_ratio[i] - std::max(ev[i], 0.0) / total));
    const Eigen::MatrixXf gram = b.components * b.components.transpose();
    worst_ortho = std::max(worst_ortho, static_cast<double>((gram - Eigen::MatrixXf::Identity(9, 9)).cwiseAbs().maxCoeff()));
  }
  // Three orthogonal modes with variances 4:3:3.
  io::CohortMatrix m;
  m.header.dims = {1, 1, 5};
  m.data = RowMatrix::Zero(6, 5);
  const float a = 2.0f, r3 = std::sqrt(3.0f);
  m.data(0, 0) = a, m.data(1, 0) = -a, m.data(2, 1) = r3, m.data(3, 1) = -r3, m.data(4, 2) = r3, m.data(5, 2) = -r3;
  for (int i = 0; i < 6; ++i) m.labels.push_back({"s" + std::to_string(i), io::Stage::pre, io::Group::longer});
  const std::size_t k06 = latent::select_k_by_variance(m, 0.6), k08 = latent::select_k_by_variance(m, 0.8);
  const std::size_t k_spec = latent::select_k_from_spectrum({0.5, 0.2, 0.15, 0.1, 0.05}, 0.8);
  o.detail << " 10 matrices 10x50: max ratio err " << worst_ratio << ", max |VV^T - I| " << worst_ortho
           << "; 4:3:3 modes k(0.6)=" << k06 << " k(0.8)=" << k08 << "; (.5,.2,.15,.1,.05) k(0.8)=" << k_spec;
  o.require(worst_ratio <= 1e-4, "explained variance off the eigensolver oracle");
  o.require(worst_ortho <= 1e-4, "components not orthonormal");
  o.require(k06 == 2 && k08 == 3 && k_spec == 3, "k selection");
}

// --- 8 -------------------------------------------------------------------

void region_checks(Outcome& o) {
  using latent::MapKind;
  std::size_t cases = 0, mismatches = 0;
  auto check = [&](const RegionCase& c) {
    ++cases;
    const bool euclid = c.map.kind == MapKind::euclidean;
    const auto r = euclid ? latent::significant_regions_euclidean(c.map, c.atlas)
                          : latent::significant_regions_cosine(c.map, c.atlas);
    if (selections(r) != (euclid ? oracle_euclidean(c) : oracle_cosine(c))) ++mismatches;
  };
  std::vector<float> top;
  for (int i = 1; i <= 100; ++i) top.push_back(static_cast<float>(i));
  check(region_case({75, 25}, top, MapKind::euclidean));
  std::vector<float> peak(top.begin(), top.begin() + 80);
  peak.push_back(1000.0f);
  peak.push_back(90.0f);
  peak.insert(peak.end(), 18, 0.1f);
  check(region_case({80, 20}, peak, MapKind::euclidean));
  std::vector<float> gate(61, 0.5f);
  gate[0] = -1.0f;
  gate[5] = -0.99f;
  check(region_case({1, 10, 10, 10, 10, 20}, gate, MapKind::cosine));
  check(region_case({10, 10}, std::vector<float>(20, 0.2f), MapKind::cosine));
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    check(random_two_region_case(seed, MapKind::euclidean));
    check(random_two_region_case(seed + 10000, MapKind::cosine));
  }
  o.detail << " " << cases << " constructed two-region cases, " << mismatches << " mismatches vs the rule oracle";
  o.require(mismatches == 0, "selection differs from the conjunction rules");
}

// --- 9 to 11 -------------------------------------------------------------

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError(IoError::Kind::open_failed, "cannot read " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

// Column `col` of the row whose first cell is `key`.
double csv_value(const fs::path& p, const std::string& key, const std::string& col) {
  const auto rows = read_csv(p);
  const auto& header = rows.at(0);
  const auto c = std::find(header.begin(), header.end(), col) - header.begin();
  for (const auto& r : rows)
    if (!r.empty() && r[0] == key) return std::stod(r.at(static_cast<std::size_t>(c)));
  throw ValidationError(p.string() + " has no row " + key);
}

struct PipelineRun {
  std::map<pipeline::StageId, double> seconds;
  double total = 0.0;
};

PipelineRun run_pipeline(const pipeline::PipelineConfig& cfg) {
  PipelineRun r;
  std::ostringstream log;
  pipeline::write_effective_config(cfg);
  for (pipeline::StageId s : pipeline::kAllStages) {
    const auto t0 = Clock::now();
    pipeline::run_stage(s, cfg, log);
    r.seconds[s] = seconds_since(t0);
    r.total += r.seconds[s];
    std::cerr << "  " << pipeline::to_string(s) << " " << r.seconds[s] << " s" << std::endl;
  }
  return r;
}

void training_sanity(Outcome& o, const pipeline::PipelineConfig& cfg, const PipelineRun& run) {
  using namespace models;
  // Overfit four 16^3 volumes.
  auto t0 = Clock::now();
  pipeline::SyntheticSpec small;
  small.n_per_group = 2;
  small.dims = {16, 16, 16};
  small.lesion_radius = {1.5, 2.5};
  const auto four = pipeline::generate(small);
  AutoencoderSpec ae;
  ae.input_dims = {16, 16, 16};
  TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.max_epochs = 200;
  tc.patience = 200;
  tc.folds = 1;
  tc.batch_size = 4;
  tc.seed = 1;
  const auto fit = train_unsupervised(four.pre, ae, tc);
  double min_ssim = 1.0;
  for (const auto& v : four.pre) {
    const Tensor x = v.as_sample().reshaped({1, 1, 16, 16, 16});
    min_ssim = std::min(min_ssim, quality::ssim(fit.model.reconstruct(x).values(), x.values()));
  }
  const double overfit_s = seconds_since(t0);

  // Freeze strategy on the reference cohort.
  t0 = Clock::now();
  const auto cohort = pipeline::generate(cfg.synthetic_effective());
  std::vector<LabeledVolume> data;
  for (std::size_t i = 0; i < cohort.pre.size(); ++i)
    data.push_back({cohort.pre[i], io::class_index(cohort.truth[i].group), cohort.truth[i].subject_id});
  ClassifierSpec cs = cfg.classifier;
  const Autoencoder pre(cs.encoder, 9);
  TrainConfig fc = cfg.classifier_effective();
  fc.strategy = Strategy::freeze;
  fc.max_epochs = 2;
  fc.folds = 2;
  fc.learning_rate = 1e-2;
  const bool frozen = train_classifier(data, cs, fc, &pre.encoder).model.encoder.params == pre.encoder.params;
  const double freeze_s = seconds_since(t0);

  const double accuracy = csv_value(cfg.stage_dir(pipeline::StageId::train_clf) / "metrics.csv", "mean", "accuracy");
  const std::size_t folds = cfg.classifier_training.folds;
  const double train_s = run.seconds.at(pipeline::StageId::train_unsup) + run.seconds.at(pipeline::StageId::train_clf);
  const double total = overfit_s + freeze_s + train_s;
  o.detail << " overfit min SSIM " << min_ssim << "; " << folds << "-fold classifier accuracy " << accuracy
           << "; freeze encoder bit-identical=" << (frozen ? "yes" : "no") << "; wall " << total << " s (overfit "
           << overfit_s << ", 32^3 pretrain+classifier " << train_s << ", freeze " << freeze_s << ")";
  o.require(min_ssim >= 0.95, "overfit SSIM below 0.95");
  o.require(folds == 5 && accuracy >= 0.9, "5-fold accuracy below 0.9");
  o.require(frozen, "freeze changed the encoder");
  o.require(total <= 15 * 60, "over 15 min");
}

void optimizer_dominance(Outcome& o, const pipeline::PipelineConfig& cfg, const PipelineRun& run) {
  const fs::path quality = cfg.stage_dir(pipeline::StageId::evaluate) / "quality.csv";
  const fs::path losses = cfg.stage_dir(pipeline::StageId::evaluate) / "losses.csv";
  const double f_opt = csv_value(quality, "optimized", "faithfulness");
  o.detail << " optimized faithfulness " << f_opt << " vs";
  for (auto m : attribution::kAllMethods) {
    const double f = csv_value(quality, attribution::to_string(m), "faithfulness");
    o.detail << " " << attribution::to_string(m) << "=" << f;
    o.require(f_opt > f, "not above " + attribution::to_string(m));
  }
  const double l_opt = csv_value(losses, "optimized", "total");
  o.detail << "; total loss " << l_opt << " vs";
  for (const std::string input : {"pc1", "pc2", "pc3", "weighted_average"}) {
    const double l = csv_value(losses, input, "total");
    o.detail << " " << input << "=" << l;
    o.require(l_opt <= l, "loss above input " + input);
  }
  const auto trace = read_csv(cfg.stage_dir(pipeline::StageId::optimize) / "trace.csv");
  bool monotone = true;
  for (std::size_t i = 2; i < trace.size(); ++i) monotone = monotone && std::stod(trace[i].back()) <= std::stod(trace[i - 1].back());
  o.detail << "; best-so-far non-increasing over " << trace.size() - 1 << " epochs=" << (monotone ? "yes" : "no")
           << "; optimize stage " << run.seconds.at(pipeline::StageId::optimize) << " s, full pipeline " << run.total << " s";
  o.require(monotone, "best-so-far trace increases");
  o.require(run.total <= 10 * 60, "pipeline over 10 min");
}

std::map<fs::path, std::string> csv_files(const fs::path& root) {
  std::map<fs::path, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root)] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

void determinism(Outcome& o, const pipeline::PipelineConfig& a, const pipeline::PipelineConfig& b) {
  const auto fa = csv_files(a.out_dir), fb = csv_files(b.out_dir);
  std::size_t differ = 0;
  for (const auto& [path, bytes] : fa) {
    const auto it = fb.find(path);
    if (it == fb.end() || it->second != bytes) {
      ++differ;
      o.detail << " differs: " << path.generic_string();
    }
  }
  o.detail << " " << fa.size() << " CSV reports compared, " << differ << " differ";
  o.require(fa.size() == fb.size() && !fa.empty(), "CSV sets differ");
  o.require(differ == 0, "reports not byte-identical");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survxai acceptance checks"};
  std::string work = "acceptance_work";
  bool skip_pipeline = false;
  app.add_option("--work-dir", work, "scratch directory for pipeline runs");
  app.add_flag("--quick", skip_pipeline, "only the criteria that need no pipeline run");
  CLI11_PARSE(app, argc, argv);

  criterion(1, "autodiff gradients match finite differences", autodiff);
  criterion(2, "attribution methods reproduce the linear-model oracle", linear_oracle);
  criterion(3, "integrated gradients completeness", ig_completeness);
  criterion(4, "faithfulness oracle", faithfulness_oracle);
  criterion(5, "sparseness analytic cases and invariances", sparseness_cases);
  criterion(6, "SSIM cases", ssim_cases);
  criterion(7, "PCA oracle, orthonormality and k selection", pca_checks);
  criterion(8, "region selection rules", region_checks);
  if (skip_pipeline) return failures == 0 ? 0 : 1;

  fs::remove_all(work);
  pipeline::PipelineConfig a = pipeline::PipelineConfig::defaults();
  a.out_dir = fs::path(work) / "run_a";
  pipeline::PipelineConfig b = a;
  b.out_dir = fs::path(work) / "run_b";

  PipelineRun run_a;
  std::string pipeline_error;
  try {
    std::cerr << "reference pipeline run" << std::endl;
    run_a = run_pipeline(a);
  } catch (const std::exception& e) {
    pipeline_error = e.what();
  }
  auto needs_run = [&](auto&& fn) {
    return [&, fn](Outcome& o) {
      if (!pipeline_error.empty()) throw std::runtime_error("pipeline failed: " + pipeline_error);
      fn(o);
    };
  };
  criterion(9, "training sanity", needs_run([&](Outcome& o) { training_sanity(o, a, run_a); }));
  criterion(10, "optimizer dominance", needs_run([&](Outcome& o) { optimizer_dominance(o, a, run_a); }));
  criterion(11, "pipeline determinism", needs_run([&](Outcome& o) {
              std::cerr << "repeat pipeline run" << std::endl;
              run_pipeline(b);
              determinism(o, a, b);
            }));
  return failures == 0 ? 0 : 1;
}
