#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "survxai/error.hpp"
#include "survxai/pipeline/stages.hpp"
#include "temp_dir.hpp"

using namespace survxai;
using namespace survxai::pipeline;
using survxai::testing::TempDir;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SURVXAI_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

SyntheticSpec small_spec(double signal, std::uint64_t seed) {
  SyntheticSpec s;
  s.n_per_group = 20;
  s.dims = {16, 16, 16};
  s.lesion_radius = {1.5, 2.5};
  s.signal_strength = signal;
  s.seed = seed;
  return s;
}

std::vector<double> contrasts(const SyntheticCohort& c) {
  std::vector<double> out;
  for (const auto& v : c.pre) out.push_back(hemisphere_contrast(v, c.atlas));
  return out;
}

// Two-sided permutation p-value of the group difference in mean contrast.
double permutation_p(const std::vector<double>& x, const std::vector<bool>& shorter, std::uint64_t seed) {
  auto diff = [&](const std::vector<bool>& g) {
    double a = 0, b = 0;
    std::size_t na = 0, nb = 0;
    for (std::size_t i = 0; i < x.size(); ++i) (g[i] ? (a += x[i], ++na) : (b += x[i], ++nb));
    return std::abs(a / na - b / nb);
  };
  const double observed = diff(shorter);
  std::mt19937_64 rng(seed);
  std::vector<bool> g = shorter;
  int extreme = 0;
  const int n = 2000;
  for (int k = 0; k < n; ++k) {
    std::shuffle(g.begin(), g.end(), rng);
    if (diff(g) >= observed) ++extreme;
  }
  return (extreme + 1.0) / (n + 1.0);
}

}  // namespace

TEST(Config, EmptyJsonGivesDefaults) {
  EXPECT_EQ(to_json(parse_config("{}")), to_json(PipelineConfig::defaults()));
}

TEST(Config, JsonRoundTrip) {
  PipelineConfig c = parse_config(R"({"seed": 7, "synthetic": {"n_per_group": 5, "dims": [16, 16, 16]},
    "optimizer": {"weights": [0.5, 0.25, 0.25], "similarity": "as-written", "learning_rate": 1e-4},
    "explain": {"methods": ["kernel_shap", "input_x_gradient"], "group": "all"}})");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.synthetic.n_per_group, 5u);
  EXPECT_EQ(c.optimizer.loss.similarity, globalopt::SimilarityTerm::as_written);
  EXPECT_DOUBLE_EQ(c.optimizer.loss.weights.l1, 0.5);
  ASSERT_EQ(c.explain.methods.size(), 2u);
  EXPECT_EQ(c.explain.methods[0], attribution::Method::kernel_shap);
  EXPECT_EQ(to_json(parse_config(to_json(c))), to_json(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(R"({"sed": 1})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"optimizer": {"lr": 1e-3}})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"seed": "one"})"), ValidationError);
  EXPECT_THROW(parse_config("{"), ValidationError);
  EXPECT_THROW(parse_config(R"({"optimizer": {"weights": [0.5, 0.5]}})"), ValidationError);
  EXPECT_THROW(parse_config(R"({"explain": {"methods": ["lime"]}})"), ValidationError);
  PipelineConfig c = parse_config(R"({"explain": {"group": "middle"}})");
  EXPECT_THROW(c.validate(), ValidationError);
  c = PipelineConfig::defaults();
  c.atlas = "/definitely/not/here.xvol";
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Config, StageSeedsAreDistinct) {
  PipelineConfig c = PipelineConfig::defaults();
  c.seed = 1000;
  const std::vector<std::uint64_t> seeds{c.synthetic_effective().seed,       c.autoencoder_effective().seed,
                                         c.classifier_effective().seed,      c.explain_effective().gradient_shap.seed,
                                         c.faithfulness_effective().seed,    c.optimizer_effective().seed};
  EXPECT_EQ(seeds[0], 1000u);
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j) EXPECT_NE(seeds[i], seeds[j]);
  for (StageId s : kAllStages) EXPECT_EQ(parse_stage_id(to_string(s)), s);
  EXPECT_EQ(to_string(StageId::train_unsup), "train-unsup");
  EXPECT_THROW(parse_stage_id("train"), ValidationError);
}

TEST(Synthetic, FullSignalIsSeparableByHemisphere) {
  for (std::uint64_t seed : {42u, 7u}) {
    const auto cohort = generate(small_spec(1.0, seed));
    const auto x = contrasts(cohort);
    ASSERT_EQ(x.size(), 40u);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const bool shorter = cohort.truth[i].group == io::Group::shorter;
      EXPECT_EQ(cohort.truth[i].left, shorter);
      correct += (x[i] > 0.0) == shorter;
    }
    EXPECT_EQ(correct, x.size()) << seed;
  }
}

TEST(Synthetic, ZeroSignalShowsNoAssociation) {
  int significant = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto cohort = generate(small_spec(0.0, 100 + seed));
    std::vector<bool> shorter;
    for (const auto& t : cohort.truth) shorter.push_back(t.group == io::Group::shorter);
    if (permutation_p(contrasts(cohort), shorter, seed) <= 0.05) ++significant;
  }
  // Under the null about 1 in 20 seeds is significant; 3 of 10 has probability < 1.2%.
  EXPECT_LE(significant, 2);
}

TEST(Synthetic, DeterministicAndWritten) {
  SyntheticSpec spec = small_spec(1.0, 3);
  spec.n_per_group = 3;
  const auto a = generate(spec), b = generate(spec);
  ASSERT_EQ(a.pre.size(), 6u);
  for (std::size_t i = 0; i < a.pre.size(); ++i) {
    EXPECT_EQ(a.pre[i].voxels, b.pre[i].voxels);
    EXPECT_EQ(a.post[i].voxels, b.post[i].voxels);
  }
  TempDir dir("cohort");
  const auto manifest = write_cohort(a, spec, dir.path());
  EXPECT_EQ(manifest.records.size(), 12u);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "ground_truth.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "atlas.xvol"));
  spec.n_per_group = 1;
  EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Synthetic, PostSurgeryZeroesTheLesion) {
  SyntheticSpec spec = small_spec(1.0, 5);
  spec.n_per_group = 2;
  const auto c = generate(spec);
  for (std::size_t s = 0; s < c.pre.size(); ++s) {
    std::size_t lesion = 0;
    for (std::size_t i = 0; i < c.masks[s].voxels.size(); ++i) {
      if (c.masks[s].voxels[i] <= 0.5f) continue;
      ++lesion;
      EXPECT_EQ(c.post[s].voxels[i], 0.0f);
      EXPECT_GT(c.pre[s].voxels[i], 0.0f);
    }
    EXPECT_GT(lesion, 0u);
  }
}

TEST(Stages, MissingPrerequisiteNamesStage) {
  TempDir dir("stages");
  PipelineConfig c = PipelineConfig::defaults();
  c.out_dir = dir.path();
  std::ostringstream log;
  try {
    run_explain(c, log);
    FAIL() << "expected a prerequisite error";
  } catch (const PrerequisiteError& e) {
    EXPECT_TRUE(e.stage() == "train-clf" || e.stage() == "gen") << e.stage();
    EXPECT_NE(std::string(e.what()).find("run '"), std::string::npos);
  }
  EXPECT_THROW(run_phase1(c, log), PrerequisiteError);
  EXPECT_THROW(run_optimize(c, log), PrerequisiteError);
}

TEST(Cli, ExitCodes) {
  TempDir dir("cli");
  const std::string out = "--quiet --out " + (dir / "out").string();
  EXPECT_EQ(run_cli("explain " + out), 1);  // no checkpoint yet
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli(""), 1);
  write_text(dir / "bad.json", R"({"unknown": true})");
  EXPECT_EQ(run_cli("gen --config " + (dir / "bad.json").string() + " " + out), 1);
  write_text(dir / "small.json", R"({"synthetic": {"n_per_group": 2, "dims": [16, 16, 16]}})");
  EXPECT_EQ(run_cli("gen --config " + (dir / "small.json").string() + " " + out), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "cohort" / "manifest.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "out" / "effective_config.json"));
  // A manifest pointing at a truncated volume fails at run time.
  std::filesystem::resize_file(dir / "out" / "cohort" / "volumes" / std::filesystem::directory_iterator(
                                                                         dir / "out" / "cohort" / "volumes")
                                                                         ->path()
                                                                         .filename(),
                               20);
  EXPECT_EQ(run_cli("phase1 --config " + (dir / "small.json").string() + " " + out), 2);
}
