// survxai: synthetic cohort generation and pipeline orchestration.
#include <CLI11.hpp>
#include <iostream>

#include "survxai/error.hpp"
#include "survxai/pipeline/stages.hpp"

namespace {

using namespace survxai;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
};

pipeline::PipelineConfig resolve(const Options& o) {
  pipeline::PipelineConfig cfg = o.config.empty() ? pipeline::PipelineConfig::defaults() : pipeline::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.out_dir = o.out;
  cfg.validate();
  return cfg;
}

int run(const Options& o, const std::optional<pipeline::StageId>& stage) {
  try {
    const pipeline::PipelineConfig cfg = resolve(o);
    if (!o.quiet) std::cout << pipeline::to_json(cfg) << std::flush;
    pipeline::write_effective_config(cfg);
    if (stage) {
      pipeline::run_stage(*stage, cfg, std::cerr);
    } else {
      pipeline::run_all(cfg, std::cerr);
    }
    return kOk;
  } catch (const PrerequisiteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ValidationError& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kFailed;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Survival explanation pipeline on 3D volumes"};
  app.require_subcommand(1);
  Options opts;
  std::optional<pipeline::StageId> chosen;
  bool all = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "JSON pipeline configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", opts.seed, "global seed (overrides the config)");
    sub->add_option("--out", opts.out, "output directory (overrides the config)");
    sub->add_flag("--quiet", opts.quiet, "do not echo the effective configuration");
  };
  for (pipeline::StageId s : pipeline::kAllStages) {
    CLI::App* sub = app.add_subcommand(pipeline::to_string(s), "run the " + pipeline::to_string(s) + " stage");
    add_common(sub);
    sub->callback([&chosen, s] { chosen = s; });
  }
  CLI::App* run_all = app.add_subcommand("run", "run every enabled stage in order");
  add_common(run_all);
  run_all->callback([&all] { all = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }
  return run(opts, all ? std::nullopt : chosen);
}
