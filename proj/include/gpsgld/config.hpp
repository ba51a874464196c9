#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gpsgld/samplers.hpp"

namespace gpsgld {

/// Raised on configuration problems; carries every violation found, not
/// just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), problems(std::move(problems)) {}
  std::vector<std::string> problems;

 private:
  static std::string join(const std::vector<std::string>& v);
};

/// Full experiment configuration, one section per module. Loaded from a
/// JSON file; unknown keys are rejected and every violation is reported at
/// once. CLI flags mirror each field and take precedence; the fully
/// resolved copy is persisted next to the outputs.
struct ExperimentConfig {
  struct DatasetSection {
    std::string path;
    std::string format = "csv";
    long subset = 0;  // 0 = use all rows; otherwise the first `subset` rows
  } dataset;

  PriorSet priors;  // defaults: Gamma(1, 1) on each component

  struct SolverSection {
    double epsilon = 1e-8;
    double q = 1.0;
    double beta = 1.0;
    std::string precision = "double";
    double delta = 0.1;
    int max_iters = 0;  // 0 = 10 n
  } solver;

  struct SgldSection {
    double eps_start = 1e-1;
    double eps_end = 1e-4;
    double gamma = 1.0;
    long total_iters = 40000;
    double freeze_threshold = 0.002;
    int variance_batch = 100;
    int probe_redraw_period = 20;
    int num_probes = 4;
    long map_subset = 500;
    int map_max_steps = 500;
    std::string init_mode = "map";  // "map": draw from N(MAP, M); "value"
    std::array<double, 3> init_value = {0.0, 0.0, 0.0};
  } sgld;

  struct MhSection {
    long iterations = 50000;
    double proposal_scale = 0.1;
    bool adapt = true;
    long burn_in = 10000;
    std::array<double, 3> init_value = {0.0, 0.0, 0.0};
    std::string init_mode = "map";
  } mh;

  struct SweepSection {
    int draws = 500;
    double shape = 1.0;  // Gamma prior shared by all three components
    double rate = 1.0;
  } sweep;

  struct GradientCheckSection {
    int draws = 10;
    int repetitions = 100;
    int num_probes = 1;
  } gradient_check;

  struct PredictSection {
    std::string chain;   // chain CSV to mix over
    std::string inputs;  // feature CSV of test points (raw units)
    long stride = 10;
    long burn_in = -1;  // -1 = the chain's own convention
  } predict;

  struct DiagnoseSection {
    std::vector<std::string> chains;
    long psrf_stride = 500;
  } diagnose;

  struct RunSection {
    int chains = 1;
    std::uint64_t seed = 20240214;
    std::string output_dir = "out";
    int workers = 0;  // 0 = hardware concurrency
    bool deterministic = false;
    bool long_run = false;
  } run;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Cross-field checks (schedule solvable, priors valid, ...).
  void validate() const;

  UlisseConfig ulisse_config() const;
  SgldConfig sgld_config() const;
  MhConfig mh_config() const;
  CmvpOptions cmvp_options() const;
};

}  // namespace gpsgld
