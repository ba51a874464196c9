#include <CLI11.hpp>

#include <iostream>

#include "gpsgld/version.hpp"
#include "gpsgld/workbench.hpp"

using gpsgld::ExperimentConfig;

namespace {

int run(int argc, char** argv) {
  // The config file is applied first so that explicit flags win.
  std::string config_path;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
  ExperimentConfig cfg;
  if (!config_path.empty()) cfg = ExperimentConfig::load(config_path);

  CLI::App app{"Gaussian-process covariance-parameter inference via SGLD with an "
               "unbiased early-stopped CG solver"};
  app.set_version_flag("--version", gpsgld::kVersion);
  app.fallthrough();
  app.require_subcommand(1);
  std::string config_dummy;
  app.add_option("--config", config_dummy, "JSON configuration file");

  app.add_option("--dataset", cfg.dataset.path, "CSV file, label in the last column");
  app.add_option("--format", cfg.dataset.format, "dataset format (csv)");
  app.add_option("--subset", cfg.dataset.subset, "use only the first N rows");

  app.add_option("--sigma-shape", cfg.priors.sigma.shape, "Gamma shape for sigma");
  app.add_option("--sigma-rate", cfg.priors.sigma.rate, "Gamma rate for sigma");
  app.add_option("--tau-shape", cfg.priors.tau.shape, "Gamma shape for tau");
  app.add_option("--tau-rate", cfg.priors.tau.rate, "Gamma rate for tau");
  app.add_option("--lambda-shape", cfg.priors.lambda.shape, "Gamma shape for lambda");
  app.add_option("--lambda-rate", cfg.priors.lambda.rate, "Gamma rate for lambda");

  app.add_option("--epsilon", cfg.solver.epsilon, "CG convergence threshold");
  app.add_option("--q", cfg.solver.q, "early-stop scale, alpha = q sqrt(n)");
  app.add_option("--beta", cfg.solver.beta, "roulette weight decay rate");
  app.add_option("--precision", cfg.solver.precision, "covariance products: double|single");
  app.add_option("--delta", cfg.solver.delta, "PCG shift, J = K + delta I");
  app.add_option("--max-iters", cfg.solver.max_iters, "CG iteration cap (0 = 10 n)");

  app.add_option("--eps-start", cfg.sgld.eps_start, "step size at t = 1");
  app.add_option("--eps-end", cfg.sgld.eps_end, "step size at t = T");
  app.add_option("--gamma", cfg.sgld.gamma, "step decay exponent, in (0.5, 1]");
  app.add_option("--iters", cfg.sgld.total_iters, "SGLD iterations T");
  app.add_option("--freeze-threshold", cfg.sgld.freeze_threshold,
                 "freeze eps_t when the noise-ratio monitor drops below this");
  app.add_option("--variance-batch", cfg.sgld.variance_batch,
                 "iterations per gradient-covariance batch");
  app.add_option("--redraw-period", cfg.sgld.probe_redraw_period,
                 "iterations between probe redraws");
  app.add_option("--num-probes", cfg.sgld.num_probes, "trace probes N_r");
  app.add_option("--map-subset", cfg.sgld.map_subset,
                 "rows used for the MAP / preconditioner estimate");
  app.add_option("--map-max-steps", cfg.sgld.map_max_steps, "MAP ascent step cap");
  std::vector<double> sgld_init, mh_init;
  app.add_option("--init-mode", cfg.sgld.init_mode,
                 "chain starts: map (draw from N(MAP, M)) or value");
  app.add_option("--init", sgld_init, "psi start (3 values) for init-mode=value")
      ->expected(3);

  app.add_option("--mh-iters", cfg.mh.iterations, "MH iterations");
  app.add_option("--proposal-scale", cfg.mh.proposal_scale, "MH proposal std dev");
  app.add_flag("--adapt,!--no-adapt", cfg.mh.adapt, "adapt the proposal scale");
  app.add_option("--mh-burn-in", cfg.mh.burn_in, "MH burn-in sample count");
  app.add_option("--mh-init-mode", cfg.mh.init_mode, "map or value");
  app.add_option("--mh-init", mh_init, "psi start (3 values) for mh-init-mode=value")
      ->expected(3);

  app.add_option("--sweep-draws", cfg.sweep.draws, "condition-sweep prior draws");
  app.add_option("--sweep-shape", cfg.sweep.shape, "condition-sweep Gamma shape");
  app.add_option("--sweep-rate", cfg.sweep.rate, "condition-sweep Gamma rate");

  app.add_option("--gc-draws", cfg.gradient_check.draws, "gradient-check theta draws");
  app.add_option("--gc-reps", cfg.gradient_check.repetitions,
                 "gradient-check repetitions per draw");
  app.add_option("--gc-probes", cfg.gradient_check.num_probes,
                 "gradient-check trace probes");

  app.add_option("--chain", cfg.predict.chain, "chain CSV to mix predictions over");
  app.add_option("--inputs", cfg.predict.inputs, "feature CSV of test points (raw units)");
  app.add_option("--stride", cfg.predict.stride, "posterior sample stride");
  app.add_option("--predict-burn-in", cfg.predict.burn_in,
                 "burn-in override (-1 = chain's own convention)");

  app.add_option("--diagnose-chain", cfg.diagnose.chains,
                 "chain CSV for diagnose (repeatable)");
  app.add_option("--psrf-stride", cfg.diagnose.psrf_stride, "PSRF checkpoint stride");

  app.add_option("--num-chains", cfg.run.chains, "parallel chains to run");
  app.add_option("--seed", cfg.run.seed, "root random seed");
  app.add_option("--output", cfg.run.output_dir, "output directory")
      ->envname("GPSGLD_OUTPUT_DIR");
  app.add_option("--workers", cfg.run.workers, "worker threads (0 = all cores)")
      ->envname("GPSGLD_WORKERS");
  app.add_flag("--deterministic", cfg.run.deterministic,
               "bit-reproducible covariance products");
  app.add_flag("--long-run", cfg.run.long_run, "allow multi-hour dataset sizes");

  for (const char* name : {"ingest", "map", "sample-sgld", "sample-mh", "diagnose",
                           "predict", "condition-sweep", "gradient-check"})
    app.add_subcommand(name);

  CLI11_PARSE(app, argc, argv);

  if (sgld_init.size() == 3)
    cfg.sgld.init_value = {sgld_init[0], sgld_init[1], sgld_init[2]};
  if (mh_init.size() == 3) cfg.mh.init_value = {mh_init[0], mh_init[1], mh_init[2]};

  const std::string command = app.get_subcommands().front()->get_name();
  return static_cast<int>(gpsgld::dispatch_command(command, cfg));
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const gpsgld::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return static_cast<int>(gpsgld::ExitCode::ConfigProblem);
  } catch (const gpsgld::CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(gpsgld::ExitCode::NumericalProblem);
  } catch (const gpsgld::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return static_cast<int>(gpsgld::ExitCode::NumericalProblem);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(gpsgld::ExitCode::IoProblem);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
