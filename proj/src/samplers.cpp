#include "gpsgld/samplers.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "gpsgld/diagnostics.hpp"

namespace gpsgld {

StepSchedule StepSchedule::calibrate(double eps_start, double eps_end, double gamma,
                                     long total_iters) {
  if (!(eps_start > 0.0) || !(eps_end > 0.0))
    throw std::invalid_argument("step schedule: eps_start and eps_end must be > 0");
  if (!(gamma > 0.5) || gamma > 1.0)
    throw std::invalid_argument("step schedule: gamma must lie in (0.5, 1]");
  if (eps_end > eps_start)
    throw std::invalid_argument("step schedule: eps_end must not exceed eps_start");
  StepSchedule s;
  s.gamma = gamma;
  if (eps_start == eps_end) {
    s.constant = true;
    s.constant_value = eps_start;
    return s;
  }
  if (total_iters < 2)
    throw std::invalid_argument("step schedule: need total_iters >= 2 for a decaying schedule");
  // Solve a (b+1)^-gamma = eps_start, a (b+T)^-gamma = eps_end.
  const double rho = std::pow(eps_start / eps_end, 1.0 / gamma);
  s.b = (static_cast<double>(total_iters) - rho) / (rho - 1.0);
  if (!(s.b > 0.0))
    throw std::invalid_argument(
        "step schedule: eps_start/eps_end ratio too large for total_iters");
  s.a = eps_start * std::pow(s.b + 1.0, gamma);
  return s;
}

void SgldConfig::validate() const {
  StepSchedule::calibrate(eps_start, eps_end, gamma, total_iters);
  if (total_iters < 1) throw std::invalid_argument("sgld: total_iters must be >= 1");
  if (!(freeze_threshold > 0.0))
    throw std::invalid_argument("sgld: freeze_threshold must be > 0");
  if (variance_batch < 2)
    throw std::invalid_argument("sgld: variance_batch must be >= 2");
  if (probe_redraw_period < 1)
    throw std::invalid_argument("sgld: probe_redraw_period must be >= 1");
  if (num_probes < 1) throw std::invalid_argument("sgld: num_probes must be >= 1");
  Eigen::LLT<Matrix3> llt(preconditioner);
  if (llt.info() != Eigen::Success ||
      (preconditioner - preconditioner.transpose()).cwiseAbs().maxCoeff() >
          1e-10 * (1.0 + preconditioner.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("sgld: preconditioner must be symmetric positive definite");
}

Vector3 sgld_step(const Vector3& psi, const Vector3& grad_estimate,
                  const Vector3& prior_grad, double eps_t, const Matrix3& M,
                  const Vector3& z) {
  Eigen::LLT<Matrix3> llt(M);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("sgld_step: M must be positive definite");
  const Vector3 drift = 0.5 * eps_t * (M * (grad_estimate + prior_grad));
  Vector3 noise = llt.matrixL() * z;
  noise *= std::sqrt(eps_t);
  const Vector3 next = psi + drift + noise;
  if (!next.allFinite())
    throw DivergenceError("sgld_step: non-finite update", next);
  return next;
}

Vector3 sgld_step(const Vector3& psi, const Vector3& grad_estimate,
                  const Vector3& prior_grad, double eps_t, const Matrix3& M,
                  RngStream& rng) {
  const Vector3 z{rng.normal(), rng.normal(), rng.normal()};
  return sgld_step(psi, grad_estimate, prior_grad, eps_t, M, z);
}

SampleChain run_sgld(const Dataset& data, const PriorSet& priors, const SgldConfig& cfg,
                     const Vector3& init, RngStream& rng, const CmvpOptions& opts) {
  cfg.validate();
  const StepSchedule schedule =
      StepSchedule::calibrate(cfg.eps_start, cfg.eps_end, cfg.gamma, cfg.total_iters);

  SampleChain chain;
  chain.seed = rng.id();
  chain.samples.reserve(cfg.total_iters);
  chain.step_sizes.reserve(cfg.total_iters);

  RngStream noise_rng = rng.split();
  RngStream probe_rng = rng.split();
  RngStream solver_rng = rng.split();

  Vector3 psi = init;
  std::vector<Vector> probes;
  SolverWarmStart warm;
  std::vector<Vector3> batch;
  batch.reserve(cfg.variance_batch);
  bool frozen = false;
  double frozen_eps = 0.0;
  const Matrix3 m_half = matrix_sqrt_spd(cfg.preconditioner);

  for (long t = 1; t <= cfg.total_iters; ++t) {
    if (cfg.gradient_mode == GradientMode::Stochastic &&
        ((t - 1) % cfg.probe_redraw_period == 0 || probes.empty())) {
      probes.clear();
      for (int i = 0; i < cfg.num_probes; ++i)
        probes.push_back(rademacher_vector(data.n(), probe_rng));
      // Probe solutions go stale with the probes; the y system is unchanged,
      // so its warm start stays.
      warm.probe_solutions.clear();
    }

    const HyperParams theta = HyperParams::from_log(psi);
    Vector3 grad;
    try {
      if (cfg.gradient_mode == GradientMode::Exact) {
        grad = exact_gradient(theta, data, ParamSpace::Log);
      } else {
        grad = stochastic_gradient(theta, data, cfg.num_probes, cfg.solver, solver_rng,
                                   &probes, &warm, opts)
                   .g_tilde;
      }
    } catch (const NumericalError&) {
      chain.diverged_at = t;
      break;
    }
    const Vector3 prior_grad = log_prior_gradient(theta, priors);
    const double eps_t = frozen ? frozen_eps : schedule.eps(t);

    try {
      const Vector3 z = cfg.inject_noise
                            ? Vector3{noise_rng.normal(), noise_rng.normal(),
                                      noise_rng.normal()}
                            : Vector3::Zero().eval();
      psi = sgld_step(psi, grad, prior_grad, eps_t, cfg.preconditioner, z);
    } catch (const DivergenceError&) {
      chain.diverged_at = t;
      break;
    }

    chain.samples.push_back(psi);
    chain.step_sizes.push_back(eps_t);
    batch.push_back(grad + prior_grad);

    if (static_cast<int>(batch.size()) == cfg.variance_batch) {
      Vector3 mean = Vector3::Zero();
      for (const auto& g : batch) mean += g;
      mean /= static_cast<double>(batch.size());
      Matrix3 v = Matrix3::Zero();
      for (const auto& g : batch) v += (g - mean) * (g - mean).transpose();
      v /= static_cast<double>(batch.size() - 1);
      chain.gradient_variance.push_back(v);
      // An infinite threshold disables the freeze rule entirely.
      if (!frozen && std::isfinite(cfg.freeze_threshold)) {
        Eigen::SelfAdjointEigenSolver<Matrix3> es(m_half * v * m_half);
        const double ratio = 0.25 * eps_t * es.eigenvalues().maxCoeff();
        if (ratio < cfg.freeze_threshold) {
          frozen = true;
          frozen_eps = eps_t;
          chain.frozen_at = t;
        }
      }
      batch.clear();
    }
  }
  chain.burn_in = chain.frozen_at.value_or(chain.size());
  return chain;
}

namespace {

double log_posterior_psi(const Dataset& data, const PriorSet& priors,
                         const Vector3& psi) {
  const HyperParams theta = HyperParams::from_log(psi);
  return log_marginal_likelihood(theta, data) + log_prior_psi(theta, priors);
}

}  // namespace

SampleChain mh_sample(const Dataset& data, const PriorSet& priors, const MhConfig& cfg,
                      const Vector3& init, RngStream& rng) {
  if (cfg.num_iters < 1) throw std::invalid_argument("mh: num_iters must be >= 1");
  if (cfg.proposal_scale < 0.0)
    throw std::invalid_argument("mh: proposal_scale must be >= 0");

  SampleChain chain;
  chain.seed = rng.id();
  chain.burn_in = std::min(cfg.burn_in, cfg.num_iters);
  chain.samples.reserve(cfg.num_iters);
  chain.accepted.reserve(cfg.num_iters);

  Vector3 psi = init;
  double lp = log_posterior_psi(data, priors, psi);
  double scale = cfg.proposal_scale;
  bool adapting = cfg.adapt;
  constexpr long kAdaptBatch = 50;
  long batch_accepts = 0;

  for (long t = 1; t <= cfg.num_iters; ++t) {
    Vector3 prop = psi;
    for (int i = 0; i < 3; ++i)
      if (cfg.update_mask[i]) prop[i] += scale * rng.normal();
    bool accept;
    if (scale == 0.0) {
      accept = true;  // degenerate random walk: chain stays put
    } else {
      double lp_prop;
      try {
        lp_prop = log_posterior_psi(data, priors, prop);
      } catch (const NumericalError&) {
        lp_prop = -std::numeric_limits<double>::infinity();
      }
      accept = std::log(rng.uniform() + 1e-300) < lp_prop - lp;
      if (accept) {
        psi = prop;
        lp = lp_prop;
      }
    }
    chain.samples.push_back(psi);
    chain.accepted.push_back(accept ? 1 : 0);
    if (accept) ++batch_accepts;

    if (adapting && t % kAdaptBatch == 0) {
      const double rate =
          static_cast<double>(batch_accepts) / static_cast<double>(kAdaptBatch);
      if (rate > 0.4)
        scale *= 1.1;
      else if (rate < 0.2)
        scale /= 1.1;
      else
        adapting = false;  // landed in the target band; keep detailed balance
      batch_accepts = 0;
    } else if (t % kAdaptBatch == 0) {
      batch_accepts = 0;
    }
  }
  return chain;
}

MapResult map_estimate(const Dataset& data_subset, const PriorSet& priors,
                       const Vector3& init, int max_steps) {
  MapResult res;
  Vector3 psi = init;
  double f = log_posterior_psi(data_subset, priors, psi);
  double step = 1.0;
  constexpr double kTolerance = 1e-6;

  auto gradient = [&](const Vector3& p) {
    const HyperParams theta = HyperParams::from_log(p);
    return Vector3(exact_gradient(theta, data_subset, ParamSpace::Log) +
                   log_prior_gradient(theta, priors));
  };

  Vector3 g = gradient(psi);
  res.gradient_norm = g.norm();
  for (res.steps = 0; res.steps < max_steps; ++res.steps) {
    if (res.gradient_norm < kTolerance) {
      res.converged = true;
      break;
    }
    // Backtracking ascent with an Armijo condition.
    bool advanced = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Vector3 cand = psi + step * g;
      double f_cand;
      try {
        f_cand = log_posterior_psi(data_subset, priors, cand);
      } catch (const NumericalError&) {
        f_cand = -std::numeric_limits<double>::infinity();
      }
      if (f_cand > f + 1e-4 * step * g.squaredNorm()) {
        psi = cand;
        f = f_cand;
        step *= 2.0;
        advanced = true;
        break;
      }
      step *= 0.5;
    }
    if (!advanced) break;  // objective differences below roundoff
    g = gradient(psi);
    res.gradient_norm = g.norm();
  }

  // Near the mode the line search drowns in roundoff of the objective well
  // before the gradient tolerance is met; a few damped Newton corrections on
  // the finite-difference Hessian close the gap.
  for (int polish = 0; polish < 12 && !res.converged && res.steps < max_steps;
       ++polish, ++res.steps) {
    if (res.gradient_norm < kTolerance) {
      res.converged = true;
      break;
    }
    const Matrix3 curvature = preconditioner_from_hessian(
        hessian_fd(gradient, psi)).M;  // (-H)^-1, clipped SPD
    Vector3 direction = curvature * g;
    for (int bt = 0; bt < 30; ++bt) {
      const Vector3 cand = psi + direction;
      Vector3 g_cand;
      try {
        g_cand = gradient(cand);
      } catch (const NumericalError&) {
        direction *= 0.5;
        continue;
      }
      if (g_cand.norm() < res.gradient_norm) {
        psi = cand;
        g = g_cand;
        res.gradient_norm = g.norm();
        break;
      }
      direction *= 0.5;
    }
    if (res.gradient_norm < kTolerance) res.converged = true;
  }

  res.params = HyperParams::from_log(psi);
  res.log_posterior = log_posterior_psi(data_subset, priors, psi);
  res.converged = res.gradient_norm < kTolerance;
  return res;
}

Matrix3 hessian_fd(const std::function<Vector3(const Vector3&)>& grad,
                   const Vector3& psi, double h) {
  Matrix3 hess;
  for (int j = 0; j < 3; ++j) {
    Vector3 hi = psi, lo = psi;
    hi[j] += h;
    lo[j] -= h;
    hess.col(j) = (grad(hi) - grad(lo)) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

PreconditionerResult preconditioner_from_hessian(const Matrix3& hessian) {
  PreconditionerResult out;
  const Matrix3 neg = -0.5 * (hessian + hessian.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix3> es(neg);
  Vector3 lam = es.eigenvalues();
  const double floor = 1e-8 * std::max(lam.maxCoeff(), 1e-300);
  if (lam.minCoeff() < floor) {
    lam = lam.cwiseMax(floor);
    out.repaired = true;
  }
  out.M = es.eigenvectors() * lam.cwiseInverse().asDiagonal() *
          es.eigenvectors().transpose();
  out.M = 0.5 * (out.M + out.M.transpose());
  return out;
}

PreconditionerResult estimate_preconditioner(const Dataset& data_subset,
                                             const PriorSet& priors,
                                             const HyperParams& map, double h) {
  auto grad = [&](const Vector3& psi) {
    const HyperParams theta = HyperParams::from_log(psi);
    return Vector3(exact_gradient(theta, data_subset, ParamSpace::Log) +
                   log_prior_gradient(theta, priors));
  };
  return preconditioner_from_hessian(hessian_fd(grad, map.psi(), h));
}

}  // namespace gpsgld
