#include "survxai/pipeline/stages.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "survxai/error.hpp"
#include "survxai/io/normalize.hpp"
#include "survxai/latent/pca.hpp"
#include "survxai/latent/regions.hpp"
#include "survxai/latent/variability.hpp"
#include "survxai/models/checkpoint.hpp"
#include "survxai/util/format.hpp"

namespace survxai::pipeline {
namespace {

namespace fs = std::filesystem;
using util::fmt_double;

constexpr const char* kTraceHeader = "fold,epoch,train_loss,val_loss,best_val_loss,learning_rate\n";

void require(const fs::path& p, StageId producer, const std::string& what) {
  if (fs::exists(p)) return;
  throw PrerequisiteError(what + " not found at " + p.generic_string() + "; run '" + to_string(producer) + "' first",
                          to_string(producer));
}

fs::path prepare(const PipelineConfig& cfg, StageId s) {
  const fs::path dir = cfg.stage_dir(s);
  fs::create_directories(dir);
  return dir;
}

io::CohortManifest load_manifest(const PipelineConfig& cfg) {
  require(cfg.manifest_path(), StageId::gen, "cohort manifest");
  io::CohortManifest m = io::CohortManifest::read(cfg.manifest_path());
  m.validate();
  return m;
}

std::array<std::uint32_t, 3> model_grid(const PipelineConfig& cfg) {
  const auto& d = cfg.autoencoder.input_dims;
  return {static_cast<std::uint32_t>(d[0]), static_cast<std::uint32_t>(d[1]), static_cast<std::uint32_t>(d[2])};
}

io::VolumeHeader model_header(const PipelineConfig& cfg) {
  io::VolumeHeader h;
  h.dims = model_grid(cfg);
  return h;
}

io::Volume to_model_grid(const io::Volume& v, const PipelineConfig& cfg) {
  const auto grid = model_grid(cfg);
  if (v.header.dims == grid) return v;
  io::VolumeHeader h = v.header;
  h.dims = grid;
  return io::Volume::from_values(h, io::resize_trilinear(v.voxels, v.header.dims, grid));
}

std::vector<const io::ManifestRecord*> explained_records(const PipelineConfig& cfg, const io::CohortManifest& m) {
  std::optional<io::Group> group;
  if (cfg.explain.group != "all") group = io::parse_group(cfg.explain.group);
  auto records = m.select(io::Stage::pre, group);
  if (records.empty()) throw ValidationError("no pre-surgery subjects in group '" + cfg.explain.group + "'");
  return records;
}

std::vector<tensor::Tensor> explained_samples(const PipelineConfig& cfg, const io::CohortManifest& m) {
  std::vector<tensor::Tensor> out;
  for (const auto* r : explained_records(cfg, m)) out.push_back(to_model_grid(io::read_volume(r->volume_path), cfg).as_sample());
  return out;
}

std::unique_ptr<models::Classifier> load_trained_classifier(const PipelineConfig& cfg) {
  const fs::path ckpt = cfg.stage_dir(StageId::train_clf) / "classifier.ckpt";
  require(ckpt, StageId::train_clf, "classifier checkpoint");
  return std::make_unique<models::Classifier>(models::load_classifier(cfg.classifier, ckpt));
}

void write_values(const io::VolumeHeader& header, const std::vector<float>& values, const fs::path& path) {
  io::write_volume(io::Volume::from_values(header, values), path);
}

std::string traces_csv(const std::vector<models::FoldRun>& runs) {
  std::string out = kTraceHeader;
  for (std::size_t f = 0; f < runs.size(); ++f) {
    for (const auto& e : runs[f].trace) {
      out += util::csv_row({std::to_string(f), std::to_string(e.epoch), fmt_double(e.train_loss), fmt_double(e.val_loss),
                            fmt_double(e.best_val_loss), fmt_double(e.learning_rate)});
    }
  }
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(util::read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::string method_file(attribution::Method m) { return "method_" + attribution::to_string(m) + ".xvol"; }

// The optimizer's inputs as written by globalize and phase1, with the trained classifier.
struct OptimizerSetup {
  std::unique_ptr<models::Classifier> model;
  globalopt::OptimizerInputs inputs;
};

OptimizerSetup load_optimizer_setup(const PipelineConfig& cfg) {
  OptimizerSetup s;
  const fs::path gdir = cfg.stage_dir(StageId::globalize);
  const fs::path ref = cfg.stage_dir(StageId::phase1) / "reference.xvol";
  require(ref, StageId::phase1, "structural reference");
  const std::array<std::string, 4> names = {"pc1.xvol", "pc2.xvol", "pc3.xvol", "weighted_average.xvol"};
  for (const auto& n : names) require(gdir / n, StageId::globalize, "globalized map " + n);
  s.model = load_trained_classifier(cfg);
  s.inputs.header = model_header(cfg);
  for (std::size_t i = 0; i < 4; ++i) s.inputs.maps[i] = io::read_volume(gdir / names[i]).voxels;
  s.inputs.reference = io::read_volume(ref).voxels;
  s.inputs.model = s.model.get();
  s.inputs.subjects = explained_samples(cfg, load_manifest(cfg));
  s.inputs.target = cfg.explain.target;
  s.inputs.validate();
  return s;
}

}  // namespace

io::CohortManifest gen_synthetic(const PipelineConfig& cfg, std::ostream& log) {
  const SyntheticSpec spec = cfg.synthetic_effective();
  const fs::path dir = prepare(cfg, StageId::gen);
  const SyntheticCohort cohort = generate(spec);
  io::CohortManifest m = write_cohort(cohort, spec, dir);
  log << "gen: " << cohort.truth.size() << " subjects written to " << dir.generic_string() << "\n";
  return m;
}

void run_phase1(const PipelineConfig& cfg, std::ostream& log) {
  const io::CohortManifest m = load_manifest(cfg);
  require(cfg.atlas_path(), StageId::gen, "atlas");
  const io::Atlas atlas = io::read_atlas(cfg.atlas_path());
  const fs::path dir = prepare(cfg, StageId::phase1);

  std::vector<const io::ManifestRecord*> all;
  for (const auto& r : m.records) all.push_back(&r);
  const io::CohortMatrix cohort = io::load_cohort(all);
  if (!cohort.header.same_grid(atlas.header)) throw ShapeError("cohort volumes and atlas are on different grids");

  const auto spectrum = latent::explained_variance_spectrum(cohort.data);
  const std::size_t k =
      std::min(latent::select_k_from_spectrum(spectrum, cfg.phase1.variance_threshold), cfg.phase1.max_components);
  std::string ev = "component,ratio,cumulative,selected\n";
  double cum = 0.0;
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    cum += spectrum[i];
    ev += util::csv_row({std::to_string(i + 1), fmt_double(spectrum[i]), fmt_double(cum), i < k ? "1" : "0"});
  }
  util::write_text(dir / "explained_variance.csv", ev);
  const latent::PCABasis basis = latent::fit_pca(cohort, k);

  std::string summary = "group,k,mean_euclidean,max_euclidean,mean_cosine,min_cosine,selected_euclidean,selected_cosine\n";
  for (io::Group g : {io::Group::longer, io::Group::shorter}) {
    const std::string gname(io::to_string(g));
    const io::CohortMatrix pre = cohort.subset(io::Stage::pre, g), post = cohort.subset(io::Stage::post, g);
    const latent::GlobalVariability gv = latent::global_variability(pre, post, basis);
    const latent::VariabilityMap first = latent::first_component_group_comparison(pre, post, basis);
    io::write_volume(gv.magnitude.as_volume(), dir / (gname + "_euclidean.xvol"));
    io::write_volume(gv.orientation.as_volume(), dir / (gname + "_cosine.xvol"));
    io::write_volume(first.as_volume(), dir / (gname + "_first_component.xvol"));
    const auto re = latent::significant_regions_euclidean(gv.magnitude, atlas);
    const auto rc = latent::significant_regions_cosine(gv.orientation, atlas);
    re.write_csv(dir / ("regions_" + gname + "_euclidean.csv"));
    rc.write_csv(dir / ("regions_" + gname + "_cosine.csv"));
    double mean_e = 0.0, max_e = -std::numeric_limits<double>::infinity(), mean_c = 0.0;
    double min_c = std::numeric_limits<double>::infinity();
    for (float v : gv.magnitude.values) {
      mean_e += v;
      max_e = std::max(max_e, double(v));
    }
    for (float v : gv.orientation.values) {
      mean_c += v;
      min_c = std::min(min_c, double(v));
    }
    mean_e /= double(gv.magnitude.values.size());
    mean_c /= double(gv.orientation.values.size());
    summary += util::csv_row({gname, std::to_string(k), fmt_double(mean_e), fmt_double(max_e), fmt_double(mean_c),
                              fmt_double(min_c), std::to_string(re.selected_count()), std::to_string(rc.selected_count())});
  }
  util::write_text(dir / "summary.csv", summary);

  // Structural reference: first component of the pre-surgery scans, on the model grid.
  const io::CohortMatrix pre_all = cohort.subset(io::Stage::pre, std::nullopt);
  const latent::PCABasis first = latent::fit_pca(pre_all, 1);
  io::Volume ref = io::Volume::from_values(cohort.header, first.component(0));
  ref = to_model_grid(ref, cfg);
  ref.voxels = io::minmax_normalize(ref.voxels);
  io::write_volume(ref, dir / "reference.xvol");
  log << "phase1: k=" << k << " components, variability maps and region reports in " << dir.generic_string() << "\n";
}

void run_train_unsup(const PipelineConfig& cfg, std::ostream& log) {
  const io::CohortManifest m = load_manifest(cfg);
  const fs::path dir = prepare(cfg, StageId::train_unsup);
  std::vector<io::Volume> volumes;
  for (const auto& r : m.records) volumes.push_back(to_model_grid(io::read_volume(r.volume_path), cfg));
  const models::UnsupervisedResult res = models::train_unsupervised(volumes, cfg.autoencoder, cfg.autoencoder_effective());
  models::save(res.model, dir / "autoencoder.ckpt");
  res.report.write_csv(dir / "metrics.csv");
  util::write_text(dir / "traces.csv", traces_csv(res.runs));
  log << "train-unsup: " << volumes.size() << " volumes, best fold " << res.best_fold << ", mean val loss "
      << fmt_double(res.report.mean().val_loss) << "\n";
}

void run_train_clf(const PipelineConfig& cfg, std::ostream& log) {
  const io::CohortManifest m = load_manifest(cfg);
  const models::TrainConfig tc = cfg.classifier_effective();
  std::optional<models::Autoencoder> ae;
  if (tc.strategy != models::Strategy::full) {
    const fs::path ckpt = cfg.stage_dir(StageId::train_unsup) / "autoencoder.ckpt";
    require(ckpt, StageId::train_unsup, "autoencoder checkpoint");
    ae.emplace(models::load_autoencoder(cfg.autoencoder, ckpt));
  }
  const fs::path dir = prepare(cfg, StageId::train_clf);
  std::vector<models::LabeledVolume> data;
  for (const auto* r : m.select(io::Stage::pre, std::nullopt)) {
    data.push_back({to_model_grid(io::read_volume(r->volume_path), cfg), io::class_index(r->group), r->subject_id});
  }
  const models::ClassifierResult res =
      models::train_classifier(data, cfg.classifier, tc, ae ? &ae->encoder : nullptr);
  models::save(res.model, dir / "classifier.ckpt");
  res.report.write_csv(dir / "metrics.csv");
  util::write_text(dir / "traces.csv", traces_csv(res.runs));

  std::vector<io::Volume> volumes;
  for (const auto& d : data) volumes.push_back(d.volume);
  const std::vector<int> pred = models::predict(res.model, volumes);
  std::string csv = "subject,label,prediction\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    csv += util::csv_row({data[i].subject, std::to_string(data[i].label), std::to_string(pred[i])});
  }
  util::write_text(dir / "predictions.csv", csv);
  log << "train-clf: " << data.size() << " subjects, strategy " << models::to_string(tc.strategy)
      << ", fold-mean accuracy " << fmt_double(res.report.mean().classification.accuracy) << "\n";
}

void run_explain(const PipelineConfig& cfg, std::ostream& log) {
  const io::CohortManifest m = load_manifest(cfg);
  const auto model = load_trained_classifier(cfg);
  const fs::path dir = prepare(cfg, StageId::explain);
  const auto records = explained_records(cfg, m);
  const attribution::MethodOptions opts = cfg.explain_effective();
  const quality::FaithfulnessConfig fc = cfg.faithfulness_effective();
  const io::VolumeHeader header = model_header(cfg);

  std::vector<tensor::Tensor> xs;
  std::string subjects = "subject,label\n";
  for (const auto* r : records) {
    xs.push_back(to_model_grid(io::read_volume(r->volume_path), cfg).as_sample());
    subjects += util::csv_row({r->subject_id, std::to_string(io::class_index(r->group))});
  }
  util::write_text(dir / "subjects.csv", subjects);

  std::string faith = "method,subject,faithfulness\n";
  for (attribution::Method method : cfg.explain.methods) {
    const std::string mname = attribution::to_string(method);
    fs::create_directories(dir / "maps" / mname);
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const tensor::Tensor a = attribution::attribute(method, *model, xs[i], cfg.explain.target, opts);
      attribution::AttributionMap map{header, a.storage(), method, cfg.explain.target, records[i]->subject_id};
      attribution::write_map(map, dir / "maps" / mname / (records[i]->subject_id + ".xvol"));
      double f = std::numeric_limits<double>::quiet_NaN();
      try {
        f = quality::faithfulness(*model, map.values, xs[i], cfg.explain.target, fc);
        sum += f;
        ++counted;
      } catch (const DegenerateVariance&) {
      }
      faith += util::csv_row({mname, records[i]->subject_id, fmt_double(f)});
    }
    log << "explain: " << mname << " mean faithfulness "
        << (counted ? fmt_double(sum / double(counted)) : std::string("undefined")) << "\n";
  }
  util::write_text(dir / "faithfulness.csv", faith);
}

void run_globalize(const PipelineConfig& cfg, std::ostream& log) {
  const fs::path edir = cfg.stage_dir(StageId::explain);
  require(edir / "faithfulness.csv", StageId::explain, "attribution faithfulness table");
  require(edir / "subjects.csv", StageId::explain, "explained subject list");
  const fs::path dir = prepare(cfg, StageId::globalize);

  std::vector<std::string> subjects;
  const auto srows = read_csv(edir / "subjects.csv");
  for (std::size_t i = 1; i < srows.size(); ++i) subjects.push_back(srows[i].at(0));
  std::map<std::string, std::pair<double, std::size_t>> faith;
  const auto frows = read_csv(edir / "faithfulness.csv");
  for (std::size_t i = 1; i < frows.size(); ++i) {
    const double f = std::stod(frows[i].at(2));
    auto& acc = faith[frows[i].at(0)];
    if (std::isfinite(f)) {
      acc.first += f;
      ++acc.second;
    }
  }

  std::vector<attribution::MethodMaps> cohort;
  for (attribution::Method method : cfg.explain.methods) {
    const std::string mname = attribution::to_string(method);
    attribution::MethodMaps mm;
    mm.method = method;
    for (const auto& s : subjects) {
      const fs::path p = edir / "maps" / mname / (s + ".xvol");
      require(p, StageId::explain, "attribution map");
      mm.maps.push_back(attribution::read_map(p).values);
    }
    const auto& acc = faith[mname];
    mm.faithfulness = acc.second ? acc.first / double(acc.second) : 0.0;
    cohort.push_back(std::move(mm));
  }
  const attribution::GlobalizationResult g = attribution::globalize(cohort, cfg.explain.n_components);
  const io::VolumeHeader header = model_header(cfg);
  for (std::size_t i = 0; i < g.normalized.size(); ++i) {
    write_values(header, g.normalized[i], dir / ("pc" + std::to_string(i + 1) + ".xvol"));
  }
  write_values(header, io::minmax_normalize(g.weighted_average), dir / "weighted_average.xvol");
  std::string weights = "method,faithfulness,weight\n";
  for (std::size_t i = 0; i < g.methods.size(); ++i) {
    write_values(header, io::minmax_normalize(g.method_means[i]), dir / method_file(g.methods[i]));
    weights += util::csv_row({attribution::to_string(g.methods[i]), fmt_double(cohort[i].faithfulness), fmt_double(g.weights[i])});
  }
  util::write_text(dir / "weights.csv", weights);
  std::string ev = "component,ratio\n";
  for (std::size_t i = 0; i < g.explained_variance_ratio.size(); ++i) {
    ev += util::csv_row({std::to_string(i + 1), fmt_double(g.explained_variance_ratio[i])});
  }
  util::write_text(dir / "explained_variance.csv", ev);
  log << "globalize: " << g.normalized.size() << " components from " << cohort.size() << " methods x "
      << subjects.size() << " subjects\n";
}

void run_optimize(const PipelineConfig& cfg, std::ostream& log) {
  const OptimizerSetup setup = load_optimizer_setup(cfg);
  const fs::path dir = prepare(cfg, StageId::optimize);
  const globalopt::OptConfig oc = cfg.optimizer_effective();

  globalopt::GlobalExplanation best;
  if (cfg.grid.enabled) {
    const auto weights = cfg.grid.weights.empty() ? globalopt::default_weight_grid() : cfg.grid.weights;
    const auto rates = cfg.grid.learning_rates.empty() ? globalopt::default_learning_rates() : cfg.grid.learning_rates;
    auto entries = globalopt::grid_search(setup.inputs, weights, rates, oc);
    std::string csv = "rank,l1,l2,l3,learning_rate,aborted,ranking_loss,faithfulness,sparseness,ssim\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      const auto& w = e.config.loss.weights;
      csv += util::csv_row({std::to_string(i + 1), fmt_double(w.l1), fmt_double(w.l2), fmt_double(w.l3),
                            fmt_double(e.config.learning_rate), e.aborted ? "1" : "0", fmt_double(e.ranking_loss),
                            fmt_double(e.quality.faithfulness), fmt_double(e.quality.sparseness), fmt_double(e.quality.ssim)});
    }
    util::write_text(dir / "grid.csv", csv);
    best = std::move(entries.front().result);
  } else {
    best = globalopt::optimize(setup.inputs, oc);
  }
  write_values(best.header, best.values, dir / "global_explanation.xvol");
  util::write_text(dir / "trace.csv", globalopt::trace_csv(best.trace));
  const auto& w = best.config.loss.weights;
  std::string meta = "weights=" + fmt_double(w.l1) + "," + fmt_double(w.l2) + "," + fmt_double(w.l3) + "\n";
  meta += "learning_rate=" + fmt_double(best.config.learning_rate) + "\n";
  meta += "similarity=" + globalopt::to_string(best.config.loss.similarity) + "\n";
  meta += "sparseness=" + globalopt::to_string(best.config.loss.sparseness) + "\n";
  meta += "best_epoch=" + std::to_string(best.best_epoch) + "\n";
  meta += "epochs=" + std::to_string(best.trace.size()) + "\n";
  meta += "target=" + std::to_string(setup.inputs.target) + "\n";
  util::write_text(dir / "global_explanation.xvol.meta", meta);
  log << "optimize: " << best.trace.size() << " epochs, best epoch " << best.best_epoch << ", faithfulness "
      << fmt_double(best.final_loss.faithfulness) << ", total " << fmt_double(best.final_loss.total) << "\n";
}

void run_evaluate(const PipelineConfig& cfg, std::ostream& log) {
  const fs::path odir = cfg.stage_dir(StageId::optimize), gdir = cfg.stage_dir(StageId::globalize);
  require(odir / "global_explanation.xvol", StageId::optimize, "global explanation");
  const OptimizerSetup setup = load_optimizer_setup(cfg);
  const fs::path dir = prepare(cfg, StageId::evaluate);
  const quality::FaithfulnessConfig fc = cfg.faithfulness_effective();

  std::vector<std::pair<std::string, std::vector<float>>> maps;
  for (attribution::Method method : cfg.explain.methods) {
    require(gdir / method_file(method), StageId::globalize, "method map");
    maps.emplace_back(attribution::to_string(method), io::read_volume(gdir / method_file(method)).voxels);
  }
  const std::array<std::string, 4> input_names = {"pc1", "pc2", "pc3", "weighted_average"};
  for (std::size_t i = 0; i < 4; ++i) maps.emplace_back(input_names[i], setup.inputs.maps[i]);
  maps.emplace_back("optimized", io::read_volume(odir / "global_explanation.xvol").voxels);

  // Composite loss under the default weights, so runs with other weights stay comparable.
  globalopt::LossOptions ranking = cfg.optimizer.loss;
  ranking.weights = globalopt::LossWeights{};
  quality::QualityReport report;
  std::string losses = "name,faithfulness,sparseness,ssim,total\n";
  for (const auto& [name, values] : maps) {
    quality::QualityRow row = globalopt::evaluate_global(values, setup.inputs, fc, name);
    const double total = globalopt::combine_loss(row.faithfulness, row.sparseness, row.ssim, ranking);
    losses += util::csv_row({name, fmt_double(row.faithfulness), fmt_double(row.sparseness), fmt_double(row.ssim),
                             fmt_double(total)});
    log << "evaluate: " << name << " faithfulness " << fmt_double(row.faithfulness) << " total " << fmt_double(total)
        << "\n";
    report.rows.push_back(std::move(row));
  }
  report.write_csv(dir / "quality.csv");
  util::write_text(dir / "losses.csv", losses);
}

void run_report(const PipelineConfig& cfg, std::ostream& log) {
  const fs::path qpath = cfg.stage_dir(StageId::evaluate) / "quality.csv";
  const fs::path lpath = cfg.stage_dir(StageId::evaluate) / "losses.csv";
  require(qpath, StageId::evaluate, "quality report");
  const fs::path p1 = cfg.stage_dir(StageId::phase1);
  require(p1 / "summary.csv", StageId::phase1, "phase I summary");
  const fs::path dir = prepare(cfg, StageId::report);
  const fs::path series = dir / "series";
  fs::create_directories(series);

  auto copy = [&](const fs::path& from, const std::string& to) {
    if (fs::exists(from)) util::write_text(series / to, util::read_text(from));
  };
  copy(qpath, "quality.csv");
  copy(lpath, "losses.csv");
  copy(cfg.stage_dir(StageId::optimize) / "trace.csv", "optimizer_trace.csv");
  copy(cfg.stage_dir(StageId::optimize) / "grid.csv", "optimizer_grid.csv");
  copy(cfg.stage_dir(StageId::train_unsup) / "traces.csv", "autoencoder_traces.csv");
  copy(cfg.stage_dir(StageId::train_clf) / "traces.csv", "classifier_traces.csv");
  copy(p1 / "explained_variance.csv", "phase1_explained_variance.csv");
  copy(cfg.stage_dir(StageId::globalize) / "explained_variance.csv", "globalize_explained_variance.csv");
  copy(cfg.stage_dir(StageId::globalize) / "weights.csv", "method_weights.csv");

  std::string regions = "group,kind,region,n_voxels,max,frac_above,selected,min,frac_below\n";
  std::string selected_text;
  for (const char* g : {"longer", "shorter"}) {
    for (const char* kind : {"euclidean", "cosine"}) {
      const fs::path p = p1 / ("regions_" + std::string(g) + "_" + kind + ".csv");
      require(p, StageId::phase1, "region report");
      const auto rows = read_csv(p);
      std::string names;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        std::vector<std::string> cells{g, kind};
        cells.insert(cells.end(), rows[i].begin(), rows[i].end());
        regions += util::csv_row(cells);
        if (rows[i].size() > 4 && rows[i][4] == "1") names += (names.empty() ? "" : " ") + rows[i][0];
      }
      selected_text += "  " + std::string(g) + " " + kind + ": " + (names.empty() ? "(none)" : names) + "\n";
    }
  }
  util::write_text(series / "regions.csv", regions);

  std::ostringstream s;
  s << "survxai report\n";
  s << "seed " << cfg.seed << ", explained group " << cfg.explain.group << ", target class " << cfg.explain.target << "\n\n";
  for (const auto& [label, stage] : {std::pair{"autoencoder", StageId::train_unsup}, std::pair{"classifier", StageId::train_clf}}) {
    const fs::path p = cfg.stage_dir(stage) / "metrics.csv";
    if (!fs::exists(p)) continue;
    const auto rows = read_csv(p);
    s << label << " fold metrics (" << rows.front().size() << " columns)\n";
    for (const auto& r : rows) {
      if (r.at(0) != "mean" && r.at(0) != "std") continue;
      s << "  " << r[0] << ":";
      for (std::size_t c = 1; c < r.size() && c < rows.front().size(); ++c) s << " " << rows.front()[c] << "=" << r[c];
      s << "\n";
    }
  }
  s << "\nglobal explanation quality\n";
  const auto q = read_csv(qpath);
  for (const auto& r : q) {
    s << "  ";
    for (std::size_t c = 0; c < r.size(); ++c) s << (c ? "\t" : "") << r[c];
    s << "\n";
  }
  if (fs::exists(lpath)) {
    s << "\ncomposite loss (default weights)\n";
    for (const auto& r : read_csv(lpath)) s << "  " << r.front() << "\t" << r.back() << "\n";
  }
  s << "\nphase I selected regions\n" << selected_text;
  util::write_text(dir / "summary.txt", s.str());
  log << "report: summary and series in " << dir.generic_string() << "\n";
}

void run_stage(StageId stage, const PipelineConfig& cfg, std::ostream& log) {
  switch (stage) {
    case StageId::gen: gen_synthetic(cfg, log); return;
    case StageId::phase1: run_phase1(cfg, log); return;
    case StageId::train_unsup: run_train_unsup(cfg, log); return;
    case StageId::train_clf: run_train_clf(cfg, log); return;
    case StageId::explain: run_explain(cfg, log); return;
    case StageId::globalize: run_globalize(cfg, log); return;
    case StageId::optimize: run_optimize(cfg, log); return;
    case StageId::evaluate: run_evaluate(cfg, log); return;
    case StageId::report: run_report(cfg, log); return;
  }
}

void run_all(const PipelineConfig& cfg, std::ostream& log) {
  for (std::size_t i = 0; i < kAllStages.size(); ++i) {
    if (cfg.enabled[i]) run_stage(kAllStages[i], cfg, log);
  }
}

void write_effective_config(const PipelineConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  util::write_text(cfg.out_dir / "effective_config.json", to_json(cfg));
}

}  // namespace survxai::pipeline
