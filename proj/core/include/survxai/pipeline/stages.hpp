#pragma once

#include <iosfwd>

#include "survxai/pipeline/config.hpp"

// Pipeline stages. Each reads the artifacts of earlier stages from cfg.out_dir
// and throws PrerequisiteError naming the stage to run first when one is missing.
namespace survxai::pipeline {

// cohort/: volumes, masks, atlas, manifest.csv, ground_truth.json
io::CohortManifest gen_synthetic(const PipelineConfig& cfg, std::ostream& log);
// phase1/: PCA spectrum, variability maps and region reports per survival group, structural reference
void run_phase1(const PipelineConfig& cfg, std::ostream& log);
// unsupervised/: autoencoder checkpoint, fold metrics, loss traces
void run_train_unsup(const PipelineConfig& cfg, std::ostream& log);
// classifier/: classifier checkpoint, fold metrics, loss traces, predictions
void run_train_clf(const PipelineConfig& cfg, std::ostream& log);
// explain/: one map per method and subject, per-map faithfulness
void run_explain(const PipelineConfig& cfg, std::ostream& log);
// globalize/: PCA components of the pooled maps, per-method means, weighted average
void run_globalize(const PipelineConfig& cfg, std::ostream& log);
// optimize/: global explanation, loss trace, optional grid results
void run_optimize(const PipelineConfig& cfg, std::ostream& log);
// evaluate/: quality of every global map, composite losses
void run_evaluate(const PipelineConfig& cfg, std::ostream& log);
// report/: summary plus plot-ready CSV series
void run_report(const PipelineConfig& cfg, std::ostream& log);

void run_stage(StageId stage, const PipelineConfig& cfg, std::ostream& log);
// Every enabled stage, in order.
void run_all(const PipelineConfig& cfg, std::ostream& log);

// <out>/effective_config.json
void write_effective_config(const PipelineConfig& cfg);

}  // namespace survxai::pipeline
