#include "gpsgld/config.hpp"

#include <fstream>
#include <set>

namespace gpsgld {

using nlohmann::json;

std::string ConfigError::join(const std::vector<std::string>& v) {
  std::string out = "configuration invalid:";
  for (const auto& p : v) out += "\n  - " + p;
  return out;
}

namespace {

/// Reads fields out of a JSON object while recording unknown keys and type
/// mismatches instead of stopping at the first problem.
class SectionReader {
 public:
  SectionReader(const json& j, std::string prefix, std::vector<std::string>& problems)
      : j_(j), prefix_(std::move(prefix)), problems_(problems) {
    if (!j_.is_object())
      problems_.push_back(prefix_.empty() ? "top level must be an object"
                                          : prefix_ + " must be an object");
  }

  ~SectionReader() {
    if (!j_.is_object()) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.contains(key))
        problems_.push_back("unknown key '" + path(key) + "'");
  }

  template <typename T>
  void field(const char* key, T& out) {
    if (!j_.is_object()) return;
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      problems_.push_back("'" + path(key) + "' has the wrong type");
    }
  }

  const json* subsection(const char* key) {
    if (!j_.is_object()) return nullptr;
    seen_.insert(key);
    if (!j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

 private:
  const json& j_;
  std::string prefix_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

void read_prior(const json* j, const std::string& name, GammaPrior& prior,
                std::vector<std::string>& problems) {
  if (!j) return;
  SectionReader r(*j, "priors." + name, problems);
  r.field("shape", prior.shape);
  r.field("rate", prior.rate);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  std::vector<std::string> problems;
  {
    SectionReader top(j, "", problems);
    if (const json* s = top.subsection("dataset")) {
      SectionReader r(*s, "dataset", problems);
      r.field("path", cfg.dataset.path);
      r.field("format", cfg.dataset.format);
      r.field("subset", cfg.dataset.subset);
    }
    if (const json* s = top.subsection("priors")) {
      SectionReader r(*s, "priors", problems);
      read_prior(r.subsection("sigma"), "sigma", cfg.priors.sigma, problems);
      read_prior(r.subsection("tau"), "tau", cfg.priors.tau, problems);
      read_prior(r.subsection("lambda"), "lambda", cfg.priors.lambda, problems);
    }
    if (const json* s = top.subsection("solver")) {
      SectionReader r(*s, "solver", problems);
      r.field("epsilon", cfg.solver.epsilon);
      r.field("q", cfg.solver.q);
      r.field("beta", cfg.solver.beta);
      r.field("precision", cfg.solver.precision);
      r.field("delta", cfg.solver.delta);
      r.field("max_iters", cfg.solver.max_iters);
    }
    if (const json* s = top.subsection("sgld")) {
      SectionReader r(*s, "sgld", problems);
      r.field("eps_start", cfg.sgld.eps_start);
      r.field("eps_end", cfg.sgld.eps_end);
      r.field("gamma", cfg.sgld.gamma);
      r.field("total_iters", cfg.sgld.total_iters);
      r.field("freeze_threshold", cfg.sgld.freeze_threshold);
      r.field("variance_batch", cfg.sgld.variance_batch);
      r.field("probe_redraw_period", cfg.sgld.probe_redraw_period);
      r.field("num_probes", cfg.sgld.num_probes);
      r.field("map_subset", cfg.sgld.map_subset);
      r.field("map_max_steps", cfg.sgld.map_max_steps);
      r.field("init_mode", cfg.sgld.init_mode);
      r.field("init_value", cfg.sgld.init_value);
    }
    if (const json* s = top.subsection("mh")) {
      SectionReader r(*s, "mh", problems);
      r.field("iterations", cfg.mh.iterations);
      r.field("proposal_scale", cfg.mh.proposal_scale);
      r.field("adapt", cfg.mh.adapt);
      r.field("burn_in", cfg.mh.burn_in);
      r.field("init_mode", cfg.mh.init_mode);
      r.field("init_value", cfg.mh.init_value);
    }
    if (const json* s = top.subsection("sweep")) {
      SectionReader r(*s, "sweep", problems);
      r.field("draws", cfg.sweep.draws);
      r.field("shape", cfg.sweep.shape);
      r.field("rate", cfg.sweep.rate);
    }
    if (const json* s = top.subsection("gradient_check")) {
      SectionReader r(*s, "gradient_check", problems);
      r.field("draws", cfg.gradient_check.draws);
      r.field("repetitions", cfg.gradient_check.repetitions);
      r.field("num_probes", cfg.gradient_check.num_probes);
    }
    if (const json* s = top.subsection("predict")) {
      SectionReader r(*s, "predict", problems);
      r.field("chain", cfg.predict.chain);
      r.field("inputs", cfg.predict.inputs);
      r.field("stride", cfg.predict.stride);
      r.field("burn_in", cfg.predict.burn_in);
    }
    if (const json* s = top.subsection("diagnose")) {
      SectionReader r(*s, "diagnose", problems);
      r.field("chains", cfg.diagnose.chains);
      r.field("psrf_stride", cfg.diagnose.psrf_stride);
    }
    if (const json* s = top.subsection("run")) {
      SectionReader r(*s, "run", problems);
      r.field("chains", cfg.run.chains);
      r.field("seed", cfg.run.seed);
      r.field("output_dir", cfg.run.output_dir);
      r.field("workers", cfg.run.workers);
      r.field("deterministic", cfg.run.deterministic);
      r.field("long_run", cfg.run.long_run);
    }
  }
  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file " + path.string()});
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError({std::string("config is not valid JSON: ") + e.what()});
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  j["dataset"] = {{"path", dataset.path},
                  {"format", dataset.format},
                  {"subset", dataset.subset}};
  auto prior = [](const GammaPrior& p) {
    return json{{"shape", p.shape}, {"rate", p.rate}};
  };
  j["priors"] = {{"sigma", prior(priors.sigma)},
                 {"tau", prior(priors.tau)},
                 {"lambda", prior(priors.lambda)}};
  j["solver"] = {{"epsilon", solver.epsilon}, {"q", solver.q},
                 {"beta", solver.beta},       {"precision", solver.precision},
                 {"delta", solver.delta},     {"max_iters", solver.max_iters}};
  j["sgld"] = {{"eps_start", sgld.eps_start},
               {"eps_end", sgld.eps_end},
               {"gamma", sgld.gamma},
               {"total_iters", sgld.total_iters},
               {"freeze_threshold", sgld.freeze_threshold},
               {"variance_batch", sgld.variance_batch},
               {"probe_redraw_period", sgld.probe_redraw_period},
               {"num_probes", sgld.num_probes},
               {"map_subset", sgld.map_subset},
               {"map_max_steps", sgld.map_max_steps},
               {"init_mode", sgld.init_mode},
               {"init_value", sgld.init_value}};
  j["mh"] = {{"iterations", mh.iterations},   {"proposal_scale", mh.proposal_scale},
             {"adapt", mh.adapt},             {"burn_in", mh.burn_in},
             {"init_mode", mh.init_mode},     {"init_value", mh.init_value}};
  j["sweep"] = {{"draws", sweep.draws}, {"shape", sweep.shape}, {"rate", sweep.rate}};
  j["gradient_check"] = {{"draws", gradient_check.draws},
                         {"repetitions", gradient_check.repetitions},
                         {"num_probes", gradient_check.num_probes}};
  j["predict"] = {{"chain", predict.chain},
                  {"inputs", predict.inputs},
                  {"stride", predict.stride},
                  {"burn_in", predict.burn_in}};
  j["diagnose"] = {{"chains", diagnose.chains}, {"psrf_stride", diagnose.psrf_stride}};
  j["run"] = {{"chains", run.chains},
              {"seed", run.seed},
              {"output_dir", run.output_dir},
              {"workers", run.workers},
              {"deterministic", run.deterministic},
              {"long_run", run.long_run}};
  return j;
}

void ExperimentConfig::validate() const {
  std::vector<std::string> problems;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  };
  check(dataset.format == "csv", "dataset.format: only 'csv' is supported");
  check(dataset.subset >= 0, "dataset.subset must be >= 0");
  for (const auto* p : {&priors.sigma, &priors.tau, &priors.lambda}) {
    check(p->shape > 0.0, "priors: shape must be > 0");
    check(p->rate > 0.0, "priors: rate must be > 0");
  }
  check(solver.epsilon > 0.0, "solver.epsilon must be > 0");
  check(solver.q > 0.0, "solver.q must be > 0");
  check(solver.beta > 0.0, "solver.beta must be > 0");
  check(solver.delta >= 0.0, "solver.delta must be >= 0");
  check(solver.precision == "double" || solver.precision == "single",
        "solver.precision must be 'double' or 'single'");
  check(solver.max_iters >= 0, "solver.max_iters must be >= 0");
  try {
    StepSchedule::calibrate(sgld.eps_start, sgld.eps_end, sgld.gamma, sgld.total_iters);
  } catch (const std::invalid_argument& e) {
    problems.push_back(std::string("sgld: ") + e.what());
  }
  check(sgld.total_iters >= 1, "sgld.total_iters must be >= 1");
  check(sgld.freeze_threshold > 0.0, "sgld.freeze_threshold must be > 0");
  check(sgld.variance_batch >= 2, "sgld.variance_batch must be >= 2");
  check(sgld.probe_redraw_period >= 1, "sgld.probe_redraw_period must be >= 1");
  check(sgld.num_probes >= 1, "sgld.num_probes must be >= 1");
  check(sgld.map_subset >= 2, "sgld.map_subset must be >= 2");
  check(sgld.init_mode == "map" || sgld.init_mode == "value",
        "sgld.init_mode must be 'map' or 'value'");
  check(mh.iterations >= 1, "mh.iterations must be >= 1");
  check(mh.proposal_scale >= 0.0, "mh.proposal_scale must be >= 0");
  check(mh.burn_in >= 0, "mh.burn_in must be >= 0");
  check(mh.init_mode == "map" || mh.init_mode == "value",
        "mh.init_mode must be 'map' or 'value'");
  check(sweep.draws >= 1, "sweep.draws must be >= 1");
  check(sweep.shape > 0.0 && sweep.rate > 0.0, "sweep: shape and rate must be > 0");
  check(gradient_check.draws >= 1, "gradient_check.draws must be >= 1");
  check(gradient_check.repetitions >= 2, "gradient_check.repetitions must be >= 2");
  check(gradient_check.num_probes >= 1, "gradient_check.num_probes must be >= 1");
  check(predict.stride >= 1, "predict.stride must be >= 1");
  check(diagnose.psrf_stride >= 1, "diagnose.psrf_stride must be >= 1");
  check(run.chains >= 1, "run.chains must be >= 1");
  check(run.workers >= 0, "run.workers must be >= 0");
  if (!problems.empty()) throw ConfigError(std::move(problems));
}

UlisseConfig ExperimentConfig::ulisse_config() const {
  UlisseConfig u;
  u.q = solver.q;
  u.beta = solver.beta;
  u.base.epsilon = solver.epsilon;
  u.base.max_iters = solver.max_iters;
  return u;
}

SgldConfig ExperimentConfig::sgld_config() const {
  SgldConfig s;
  s.eps_start = sgld.eps_start;
  s.eps_end = sgld.eps_end;
  s.gamma = sgld.gamma;
  s.total_iters = sgld.total_iters;
  s.freeze_threshold = sgld.freeze_threshold;
  s.variance_batch = sgld.variance_batch;
  s.probe_redraw_period = sgld.probe_redraw_period;
  s.num_probes = sgld.num_probes;
  s.solver = ulisse_config();
  return s;
}

MhConfig ExperimentConfig::mh_config() const {
  MhConfig m;
  m.num_iters = mh.iterations;
  m.proposal_scale = mh.proposal_scale;
  m.adapt = mh.adapt;
  m.burn_in = mh.burn_in;
  return m;
}

CmvpOptions ExperimentConfig::cmvp_options() const {
  CmvpOptions o;
  o.precision = solver.precision == "single" ? Precision::Single : Precision::Double;
  o.deterministic = run.deterministic;
  return o;
}

}  // namespace gpsgld
