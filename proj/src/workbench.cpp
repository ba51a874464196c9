#include "gpsgld/workbench.hpp"

#include <Eigen/Dense>
#include <omp.h>

#include <chrono>
#include <fstream>
#include <iostream>
#include <thread>

#include "gpsgld/diagnostics.hpp"
#include "gpsgld/predictive.hpp"
#include "gpsgld/version.hpp"

namespace gpsgld {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr long kDeskScaleLimit = 5000;  // beyond this, runs require long_run

class RunManifest {
 public:
  RunManifest(const std::string& command, const ExperimentConfig& cfg)
      : dir_(cfg.run.output_dir), start_(std::chrono::steady_clock::now()) {
    j_["command"] = command;
    j_["version"] = kVersion;
    j_["seed"] = cfg.run.seed;
    j_["deterministic"] = cfg.run.deterministic;
    j_["config"] = cfg.to_json();
    j_["outputs"] = json::array();
    j_["counters"] = json::object();
  }

  void counter(const std::string& name, double value) { j_["counters"][name] = value; }
  void note(const std::string& key, const json& value) { j_[key] = value; }

  fs::path output(const std::string& name) {
    j_["outputs"].push_back(name);
    return dir_ / name;
  }

  void write(const std::string& command) {
    j_["wall_clock_sec"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream out(dir_ / ("manifest_" + command + ".json"));
    out << j_.dump(2) << "\n";
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  json j_;
  std::chrono::steady_clock::time_point start_;
};

void prepare_output_dir(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.run.output_dir);
  std::ofstream out(fs::path(cfg.run.output_dir) / "config_resolved.json");
  out << cfg.to_json().dump(2) << "\n";
}

int resolve_workers(const ExperimentConfig& cfg) {
  if (cfg.run.workers > 0) return cfg.run.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

Dataset take_rows(const Dataset& data, long m) {
  if (m <= 0 || m >= data.n()) return data;
  Dataset out;
  out.X = data.X.topRows(m);
  out.y = data.y.head(m);
  return out;
}

void guard_desk_scale(const ExperimentConfig& cfg, const Dataset& data,
                      const char* what) {
  if (data.n() > kDeskScaleLimit && !cfg.run.long_run)
    throw ConfigError({std::string(what) + " on n = " + std::to_string(data.n()) +
                       " may take hours; pass --long-run (run.long_run) to confirm"});
}

struct InitPlan {
  Vector3 center = Vector3::Zero();
  Matrix3 M = Matrix3::Identity();
  bool from_map = false;
  MapResult map;
  bool repaired = false;
};

InitPlan make_init_plan(const ExperimentConfig& cfg, const Dataset& data,
                        const std::string& init_mode,
                        const std::array<double, 3>& init_value) {
  InitPlan plan;
  if (init_mode == "value") {
    plan.center = Vector3(init_value[0], init_value[1], init_value[2]);
    return plan;
  }
  const Dataset subset = take_rows(data, cfg.sgld.map_subset);
  const Vector3 start(cfg.sgld.init_value[0], cfg.sgld.init_value[1],
                      cfg.sgld.init_value[2]);
  plan.map = map_estimate(subset, cfg.priors, start, cfg.sgld.map_max_steps);
  const PreconditionerResult pre =
      estimate_preconditioner(subset, cfg.priors, plan.map.params);
  plan.center = plan.map.params.psi();
  plan.M = pre.M;
  plan.repaired = pre.repaired;
  plan.from_map = true;
  return plan;
}

/// Chains are dispersed by drawing starts from N(center, M).
std::vector<Vector3> draw_chain_inits(const InitPlan& plan, int chains, RngStream& rng) {
  std::vector<Vector3> inits;
  Eigen::LLT<Matrix3> llt(plan.M);
  for (int c = 0; c < chains; ++c) {
    if (!plan.from_map) {
      inits.push_back(plan.center);
      continue;
    }
    const Vector3 z(rng.normal(), rng.normal(), rng.normal());
    inits.push_back(plan.center + llt.matrixL() * z);
  }
  return inits;
}

std::vector<DiagnosticRow> psrf_series(const std::vector<SampleChain>& chains,
                                       long stride) {
  static const char* kParams[3] = {"log_sigma", "log_tau", "log_lambda"};
  std::vector<DiagnosticRow> rows;
  if (chains.size() < 2) return rows;
  long len = chains[0].size();
  for (const auto& c : chains) len = std::min(len, c.size());
  for (long t = stride; t <= len; t += stride) {
    std::vector<std::vector<Vector3>> prefixes;
    for (const auto& c : chains)
      prefixes.emplace_back(c.samples.begin(), c.samples.begin() + t);
    if (t < 10) continue;
    const auto per_param = psrf_per_parameter(prefixes);
    for (int p = 0; p < 3; ++p)
      rows.push_back({t, std::string("psrf_") + kParams[p], per_param[p].value});
    const auto summary = psrf_summary(per_param);
    rows.push_back({t, "psrf_median", summary.median});
    rows.push_back({t, "psrf_p975", summary.p975});
  }
  return rows;
}

void append_ess_rows(std::vector<DiagnosticRow>& rows, const SampleChain& chain,
                     int chain_index) {
  static const char* kParams[3] = {"log_sigma", "log_tau", "log_lambda"};
  const long start = std::min(chain.burn_in, chain.size());
  const long len = chain.size() - start;
  if (len < 100) return;
  for (int p = 0; p < 3; ++p) {
    std::vector<double> vals(len);
    for (long t = 0; t < len; ++t) vals[t] = chain.samples[start + t][p];
    const EssResult ess = effective_sample_size(vals);
    rows.push_back({chain.size(),
                    "ess_" + std::string(kParams[p]) + "_chain" + std::to_string(chain_index),
                    ess.degenerate ? 0.0 : ess.value});
  }
}

template <typename RunChain>
std::vector<SampleChain> run_chains_parallel(int num_chains, int workers,
                                             RunChain&& run_one) {
  std::vector<SampleChain> out(num_chains);
  const int outer = std::max(1, std::min(num_chains, workers));
  const int inner = std::max(1, workers / outer);
  omp_set_max_active_levels(2);
#pragma omp parallel for num_threads(outer) schedule(dynamic)
  for (int c = 0; c < num_chains; ++c) {
    omp_set_num_threads(inner);
    out[c] = run_one(c);
  }
  omp_set_num_threads(workers);
  return out;
}

json matrix3_to_json(const Matrix3& m) {
  json rows = json::array();
  for (int i = 0; i < 3; ++i) rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
  return rows;
}

}  // namespace

std::pair<Dataset, Scaler> load_configured_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset.path.empty())
    throw ConfigError({"dataset.path is required for this command"});
  auto [data, scaler] = load_dataset(cfg.dataset.path);
  if (cfg.dataset.subset > 0 && cfg.dataset.subset < data.n()) {
    // Re-standardize the subset so its columns meet the dataset contract.
    const RowMatrix x_raw = data.X.topRows(cfg.dataset.subset);
    const Vector y_raw = data.y.head(cfg.dataset.subset);
    RowMatrix x_orig(cfg.dataset.subset, data.d());
    Vector y_orig(cfg.dataset.subset);
    for (Eigen::Index i = 0; i < cfg.dataset.subset; ++i) {
      for (Eigen::Index k = 0; k < data.d(); ++k)
        x_orig(i, k) = x_raw(i, k) * (scaler.x_std[k] > 0 ? scaler.x_std[k] : 1.0) +
                       scaler.x_mean[k];
      y_orig[i] = y_raw[i] * scaler.y_std + scaler.y_mean;
    }
    return standardize(x_orig, y_orig);
  }
  return {std::move(data), std::move(scaler)};
}

ExitCode run_ingest(const ExperimentConfig& cfg) {
  prepare_output_dir(cfg);
  RunManifest manifest("ingest", cfg);
  auto [data, scaler] = load_configured_dataset(cfg);
  write_dataset_csv(manifest.output("standardized.csv"), data);
  json sc;
  sc["x_mean"] = std::vector<double>(scaler.x_mean.data(),
                                     scaler.x_mean.data() + scaler.x_mean.size());
  sc["x_std"] = std::vector<double>(scaler.x_std.data(),
                                    scaler.x_std.data() + scaler.x_std.size());
  sc["y_mean"] = scaler.y_mean;
  sc["y_std"] = scaler.y_std;
  std::ofstream(manifest.output("scaler.json")) << sc.dump(2) << "\n";
  manifest.counter("n", static_cast<double>(data.n()));
  manifest.counter("d", static_cast<double>(data.d()));
  manifest.write("ingest");
  return ExitCode::Ok;
}

ExitCode run_map(const ExperimentConfig& cfg) {
  prepare_output_dir(cfg);
  RunManifest manifest("map", cfg);
  auto [data, scaler] = load_configured_dataset(cfg);
  const Dataset subset = take_rows(data, cfg.sgld.map_subset);
  const Vector3 start(cfg.sgld.init_value[0], cfg.sgld.init_value[1],
                      cfg.sgld.init_value[2]);
  const MapResult map = map_estimate(subset, cfg.priors, start, cfg.sgld.map_max_steps);
  const PreconditionerResult pre = estimate_preconditioner(subset, cfg.priors, map.params);
  json out;
  out["psi"] = {map.params.psi()[0], map.params.psi()[1], map.params.psi()[2]};
  out["theta"] = {map.params.sigma, map.params.tau, map.params.lambda};
  out["converged"] = map.converged;
  out["steps"] = map.steps;
  out["gradient_norm"] = map.gradient_norm;
  out["log_posterior"] = map.log_posterior;
  out["preconditioner"] = matrix3_to_json(pre.M);
  out["preconditioner_repaired"] = pre.repaired;
  std::ofstream(manifest.output("map.json")) << out.dump(2) << "\n";
  manifest.counter("map_steps", map.steps);
  manifest.counter("subset_n", static_cast<double>(subset.n()));
  manifest.write("map");
  return map.converged ? ExitCode::Ok : ExitCode::NumericalProblem;
}

ExitCode run_sample_sgld(const ExperimentConfig& cfg) {
  prepare_output_dir(cfg);
  RunManifest manifest("sample-sgld", cfg);
  auto [data, scaler] = load_configured_dataset(cfg);
  guard_desk_scale(cfg, data, "sample-sgld");

  RngStream root(cfg.run.seed);
  const InitPlan plan = make_init_plan(cfg, data, cfg.sgld.init_mode, cfg.sgld.init_value);
  RngStream init_rng = root.split();
  const auto inits = draw_chain_inits(plan, cfg.run.chains, init_rng);
  std::vector<RngStream> chain_streams;
  for (int c = 0; c < cfg.run.chains; ++c) chain_streams.push_back(root.split());

  SgldConfig sgld_cfg = cfg.sgld_config();
  sgld_cfg.preconditioner = plan.M;
  const CmvpOptions opts = cfg.cmvp_options();

  const auto chains = run_chains_parallel(
      cfg.run.chains, resolve_workers(cfg), [&](int c) {
        return run_sgld(data, cfg.priors, sgld_cfg, inits[c], chain_streams[c], opts);
      });

  long total_samples = 0;
  bool any_diverged = false;
  for (int c = 0; c < cfg.run.chains; ++c) {
    write_chain_csv(manifest.output("chain_sgld_" + std::to_string(c) + ".csv"),
                    chains[c], false);
    total_samples += chains[c].size();
    any_diverged = any_diverged || chains[c].diverged_at.has_value();
  }
  if (cfg.run.chains >= 2)
    write_diagnostics_csv(manifest.output("psrf.csv"),
                          psrf_series(chains, cfg.diagnose.psrf_stride));
  if (plan.from_map) {
    manifest.note("map_psi", {plan.center[0], plan.center[1], plan.center[2]});
    manifest.note("preconditioner", matrix3_to_json(plan.M));
  }
  manifest.counter("chains", cfg.run.chains);
  manifest.counter("total_samples", static_cast<double>(total_samples));
  manifest.write("sample-sgld");
  if (any_diverged) {
    std::cerr << "sample-sgld: at least one chain diverged; partial output kept\n";
    return ExitCode::NumericalProblem;
  }
  return ExitCode::Ok;
}

ExitCode run_sample_mh(const ExperimentConfig& cfg) {
  prepare_output_dir(cfg);
  RunManifest manifest("sample-mh", cfg);
  auto [data, scaler] = load_configured_dataset(cfg);
  if (data.n() > kDenseCapacity)
    throw CapacityError("sample-mh needs the dense marginal likelihood; n = " +
                        std::to_string(data.n()) + " exceeds the guard of " +
                        std::to_string(kDenseCapacity));

  RngStream root(cfg.run.seed);
  const InitPlan plan = make_init_plan(cfg, data, cfg.mh.init_mode, cfg.mh.init_value);
  RngStream init_rng = root.split();
  const auto inits = draw_chain_inits(plan, cfg.run.chains, init_rng);
  std::vector<RngStream> chain_streams;
  for (int c = 0; c < cfg.run.chains; ++c) chain_streams.push_back(root.split());

  const MhConfig mh_cfg = cfg.mh_config();
  const auto chains = run_chains_parallel(
      cfg.run.chains, resolve_workers(cfg),
      [&](int c) { return mh_sample(data, cfg.priors, mh_cfg, inits[c], chain_streams[c]); });

  double acceptance = 0.0;
  for (int c = 0; c < cfg.run.chains; ++c) {
    write_chain_csv(manifest.output("chain_mh_" + std::to_string(c) + ".csv"), chains[c],
                    true);
    long acc = 0;
    for (char a : chains[c].accepted) acc += a;
    acceptance += static_cast<double>(acc) / std::max<long>(1, chains[c].size());
  }
  if (cfg.run.chains >= 2)
    write_diagnostics_csv(manifest.output("psrf.csv"),
                          psrf_series(chains, cfg.diagnose.psrf_stride));
  manifest.counter("chains", cfg.run.chains);
  manifest.counter("mean_acceptance_rate", acceptance / cfg.run.chains);
  manifest.write("sample-mh");
  return ExitCode::Ok;
}

ExitCode run_diagnose(const ExperimentConfig& cfg) {
  prepare_output_dir(cfg);
  RunManifest manifest("diagnose", cfg);
  if (cfg.diagnose.chains.empty())
    throw ConfigError({"diagnose.chains: at least one chain file is required"});
  std::vector<SampleChain> chains;
  for (const auto& path : cfg.diagnose.chains) chains.push_back(read_chain_csv(path));

  std::vector<DiagnosticRow> rows;
  if (chains.size() >= 2) {
    long len = chains[0].size();
    for (const auto& c : chains) len = std::min(len, c.size());
    for (auto& c : chains)
      if (c.size() > len) {
        c.samples.resize(len);
        c.step_sizes.resize(len);
      }
    rows = psrf_series(chains, cfg.diagnose.psrf_stride);
  }
  for (size_t c = 0; c < chains.size(); ++c)
    append_ess_rows(rows, chains[c], static_cast<int>(c));
  write_diagnostics_csv(manifest.output("diagnostics.csv"), rows);
  manifest.counter("chains", static_cast<double>(chains.size()));
  manifest.write("diagnose");
  return ExitCode::Ok;
}

ExitCode run_predict(const ExperimentConfig& cfg) {
  prepare_output_dir(cfg);
  RunManifest manifest("predict", cfg);
  auto [data, scaler] = load_configured_dataset(cfg);
  if (cfg.predict.chain.empty() || cfg.predict.inputs.empty())
    throw ConfigError({"predict.chain and predict.inputs are required"});
  const SampleChain chain = read_chain_csv(cfg.predict.chain);
  const RowMatrix raw_inputs = load_feature_csv(cfg.predict.inputs, data.d());
  RowMatrix pts(raw_inputs.rows(), raw_inputs.cols());
  for (Eigen::Index i = 0; i < raw_inputs.rows(); ++i)
    pts.row(i) = scaler.standardize_point(raw_inputs.row(i).transpose()).transpose();

  std::optional<long> burn;
  if (cfg.predict.burn_in >= 0) burn = cfg.predict.burn_in;
  const auto results =
      predict_mc_batch(chain, data, pts, cfg.predict.stride, burn, cfg.cmvp_options());
  std::vector<std::pair<double, double>> mean_var;
  for (const auto& r : results) mean_var.emplace_back(r.mean, r.variance);
  write_predictions_csv(manifest.output("predictions.csv"), mean_var, &scaler);
  manifest.counter("test_points", static_cast<double>(results.size()));
  manifest.counter("samples_mixed",
                   static_cast<double>((chain.size() - (burn ? *burn : chain.burn_in) +
                                        cfg.predict.stride - 1) /
                                       cfg.predict.stride));
  manifest.write("predict");
  return ExitCode::Ok;
}

ExitCode run_condition_sweep(const ExperimentConfig& cfg) {
  prepare_output_dir(cfg);
  RunManifest manifest("condition-sweep", cfg);
  auto [data, scaler] = load_configured_dataset(cfg);
  const GammaPrior prior{cfg.sweep.shape, cfg.sweep.rate};
  std::vector<HyperParams> draws;
  const auto kappas =
      condition_sweep(data, prior, cfg.sweep.draws, cfg.run.seed, &draws);
  write_condition_sweep_csv(manifest.output("condition_sweep.csv"), draws, kappas);
  manifest.counter("draws", cfg.sweep.draws);
  manifest.write("condition-sweep");
  return ExitCode::Ok;
}

ExitCode run_gradient_check(const ExperimentConfig& cfg) {
  prepare_output_dir(cfg);
  RunManifest manifest("gradient-check", cfg);
  auto [data, scaler] = load_configured_dataset(cfg);
  if (data.n() > kDenseCapacity)
    throw CapacityError("gradient-check needs dense exact gradients; reduce dataset.subset");

  RngStream rng(cfg.run.seed);
  const CmvpOptions opts = cfg.cmvp_options();
  struct Method {
    const char* name;
    double q;  // <= 0 means run CG to full convergence
  };
  const Method methods[] = {{"cg", -1.0}, {"ulisse_q0.1", 0.1}, {"ulisse_q1", 1.0}};

  std::ofstream out(manifest.output("gradient_check.csv"));
  out << "draw_index,kappa,method,mean_log10_rel_err,mean_iterations\n";
  long total_iters = 0;
  for (int draw = 0; draw < cfg.gradient_check.draws; ++draw) {
    HyperParams theta = HyperParams::from_natural(
        rng.gamma(cfg.priors.sigma.shape, cfg.priors.sigma.rate),
        rng.gamma(cfg.priors.tau.shape, cfg.priors.tau.rate),
        rng.gamma(cfg.priors.lambda.shape, cfg.priors.lambda.rate));
    const double kappa = condition_number(theta, data);
    const Vector3 exact = exact_gradient(theta, data, ParamSpace::Natural);
    for (const Method& m : methods) {
      UlisseConfig ucfg = cfg.ulisse_config();
      if (m.q > 0.0)
        ucfg.q = m.q;
      else
        ucfg.q = 0.5 * ucfg.base.epsilon / std::sqrt(static_cast<double>(data.n()));
      double sum_log10 = 0.0, sum_iters = 0.0;
      for (int rep = 0; rep < cfg.gradient_check.repetitions; ++rep) {
        const GradientEstimate est = stochastic_gradient(
            theta, data, cfg.gradient_check.num_probes, ucfg, rng, nullptr, nullptr, opts);
        const Vector3 natural = est.g_tilde.cwiseQuotient(theta.natural());
        sum_log10 += std::log10(
            std::max(gradient_relative_error(exact, natural), 1e-300));
        sum_iters += static_cast<double>(est.solver_iterations);
        total_iters += est.solver_iterations;
      }
      const double reps = cfg.gradient_check.repetitions;
      out << draw << ',' << kappa << ',' << m.name << ',' << (sum_log10 / reps) << ','
          << (sum_iters / reps) << "\n";
    }
  }
  manifest.counter("total_solver_iterations", static_cast<double>(total_iters));
  manifest.write("gradient-check");
  return ExitCode::Ok;
}

ExitCode dispatch_command(const std::string& command, const ExperimentConfig& cfg) {
  cfg.validate();
  CmvpOptions::deterministic_default() = cfg.run.deterministic;
  omp_set_num_threads(resolve_workers(cfg));
  if (command == "ingest") return run_ingest(cfg);
  if (command == "map") return run_map(cfg);
  if (command == "sample-sgld") return run_sample_sgld(cfg);
  if (command == "sample-mh") return run_sample_mh(cfg);
  if (command == "diagnose") return run_diagnose(cfg);
  if (command == "predict") return run_predict(cfg);
  if (command == "condition-sweep") return run_condition_sweep(cfg);
  if (command == "gradient-check") return run_gradient_check(cfg);
  throw ConfigError({"unknown command '" + command + "'"});
}

}  // namespace gpsgld
