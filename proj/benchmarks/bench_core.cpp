#include <benchmark/benchmark.h>

#include <random>

#include "survxai/latent/pca.hpp"
#include "survxai/quality/quality.hpp"
#include "survxai/tensor/ops.hpp"

using namespace survxai;
using tensor::Tape;
using tensor::Tensor;

namespace {

Tensor random_tensor(tensor::Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  Tensor t(std::move(shape));
  for (float& v : t.storage()) v = u(rng);
  return t;
}

// Same-padded 3^3 convolution on a side^3 volume, forward and backward.
void BM_Conv3d(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto channels = static_cast<std::size_t>(state.range(1));
  const Tensor x = random_tensor({1, channels, side, side, side}, 1);
  const Tensor w = random_tensor({channels, channels, 3, 3, 3}, 2);
  const Tensor b = random_tensor({channels}, 3);
  for (auto _ : state) {
    Tape tape;
    auto wv = tape.leaf(w);
    auto y = tensor::ops::conv3d(tape.constant(x), wv, tape.constant(b), {1, 1});
    tape.backward(y, Tensor(y.shape(), 1.0f));
    benchmark::DoNotOptimize(tape.grad(wv));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side * side));
}
BENCHMARK(BM_Conv3d)->Args({16, 8})->Args({32, 8})->Args({32, 16})->Unit(benchmark::kMillisecond);

// PCA of a cohort of subjects over a 32^3 grid.
void BM_FitPca(benchmark::State& state) {
  const auto rows = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<float> n(0.0f, 1.0f);
  latent::RowMatrix data(rows, 32 * 32 * 32);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = n(rng);
  for (auto _ : state) benchmark::DoNotOptimize(latent::fit_pca(data, 8));
}
BENCHMARK(BM_FitPca)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

// Faithfulness of a candidate map against precomputed output drops.
void BM_ProbeFaithfulness(benchmark::State& state) {
  const auto subjects = static_cast<std::size_t>(state.range(0));
  const std::size_t voxels = 32 * 32 * 32, subsets = 20;
  std::mt19937_64 rng(5);
  quality::FaithfulnessProbe probe;
  probe.features = voxels;
  quality::FaithfulnessConfig cfg;
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t s = 0; s < subjects; ++s) {
    cfg.seed = s;
    probe.subsets.push_back(quality::draw_subsets(voxels, cfg));
    std::vector<double> drops(subsets);
    for (double& d : drops) d = n(rng);
    probe.drops.push_back(drops);
  }
  const auto g = random_tensor({voxels}, 6).storage();
  std::vector<float> grad;
  for (auto _ : state) benchmark::DoNotOptimize(probe.evaluate_with_gradient(g, {}, grad));
}
BENCHMARK(BM_ProbeFaithfulness)->Arg(20)->Arg(40)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
