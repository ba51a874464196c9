#pragma once

#include "gpsgld/config.hpp"
#include "gpsgld/io.hpp"

namespace gpsgld {

/// Exit categories reported by the CLI.
enum class ExitCode : int {
  Ok = 0,
  ConfigProblem = 2,
  IoProblem = 3,
  NumericalProblem = 4,
};

/// Each subcommand writes its artifacts plus a run manifest
/// (manifest_<command>.json: resolved config, seeds, versions, wall clock,
/// iteration counters) into run.output_dir.
ExitCode run_ingest(const ExperimentConfig& cfg);
ExitCode run_map(const ExperimentConfig& cfg);
ExitCode run_sample_sgld(const ExperimentConfig& cfg);
ExitCode run_sample_mh(const ExperimentConfig& cfg);
ExitCode run_diagnose(const ExperimentConfig& cfg);
ExitCode run_predict(const ExperimentConfig& cfg);
ExitCode run_condition_sweep(const ExperimentConfig& cfg);
ExitCode run_gradient_check(const ExperimentConfig& cfg);

ExitCode dispatch_command(const std::string& command, const ExperimentConfig& cfg);

/// Loads the configured dataset, applying dataset.subset.
std::pair<Dataset, Scaler> load_configured_dataset(const ExperimentConfig& cfg);

}  // namespace gpsgld
