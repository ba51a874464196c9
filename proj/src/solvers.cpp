#include "gpsgld/solvers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace gpsgld {

CgEngine::CgEngine(const HyperParams& theta, const Dataset& data, Vector b,
                   CgConfig cfg, CmvpOptions opts)
    : theta_(theta), data_(data), opts_(opts) {
  if (b.size() != data.n())
    throw std::invalid_argument("cg: right-hand side length does not match dataset");
  max_iters_ = cfg.resolved_max_iters(data.n());
  if (cfg.initial_guess) {
    if (cfg.initial_guess->size() != data.n())
      throw std::invalid_argument("cg: initial guess length does not match dataset");
    solution_ = *cfg.initial_guess;
    resid_ = b - cmvp(theta_, data_, solution_, opts_);
  } else {
    solution_ = Vector::Zero(data.n());
    resid_ = std::move(b);
  }
  direction_ = resid_;
  resid_norm2_ = resid_.squaredNorm();
  resid_norm_ = std::sqrt(resid_norm2_);
}

const Vector& CgEngine::step() {
  kd_ = cmvp(theta_, data_, direction_, opts_);
  const double dkd = direction_.dot(kd_);
  if (!(dkd > 0.0))
    throw NumericalError(
        "cg: d^T K d <= 0 at iteration " + std::to_string(iterations_) +
        "; positive definiteness lost (consider larger lambda)");
  const double alpha = resid_norm2_ / dkd;
  increment_ = alpha * direction_;
  solution_ += increment_;
  resid_ -= alpha * kd_;
  const double next_norm2 = resid_.squaredNorm();
  const double beta = next_norm2 / resid_norm2_;
  direction_ = resid_ + beta * direction_;
  resid_norm2_ = next_norm2;
  resid_norm_ = std::sqrt(next_norm2);
  ++iterations_;
  return increment_;
}

SolveReport CgEngine::report(double governing_threshold) const {
  SolveReport rep;
  rep.solution = solution_;
  rep.iterations = iterations_;
  rep.final_residual_norm = resid_norm_;
  rep.converged = resid_norm_ < governing_threshold;
  return rep;
}

SolveReport cg_solve(const HyperParams& theta, const Dataset& data, const Vector& b,
                     const CgConfig& cfg, const CmvpOptions& opts) {
  CgEngine engine(theta, data, b, cfg, opts);
  while (engine.residual_norm() >= cfg.epsilon && !engine.exhausted()) engine.step();
  return engine.report(cfg.epsilon);
}

SolveReport pcg_solve(const HyperParams& theta, const Dataset& data, const Vector& b,
                      double delta, const CgConfig& outer_cfg, const CgConfig& inner_cfg,
                      const CmvpOptions& opts) {
  if (delta < 0.0) throw std::invalid_argument("pcg: delta must be >= 0");
  if (b.size() != data.n())
    throw std::invalid_argument("pcg: right-hand side length does not match dataset");
  const HyperParams theta_j =
      HyperParams::from_natural(theta.sigma, theta.tau, theta.lambda + delta);
  CgConfig inner = inner_cfg;
  inner.initial_guess.reset();

  SolveReport rep;
  if (outer_cfg.initial_guess) {
    rep.solution = *outer_cfg.initial_guess;
    rep.solution.conservativeResize(data.n());
  } else {
    rep.solution = Vector::Zero(data.n());
  }
  Vector r = outer_cfg.initial_guess ? Vector(b - cmvp(theta, data, rep.solution, opts))
                                     : b;
  rep.final_residual_norm = r.norm();
  const int max_outer = outer_cfg.resolved_max_iters(data.n());

  auto inner_solve = [&](const Vector& rhs) {
    SolveReport in = cg_solve(theta_j, data, rhs, inner, opts);
    rep.inner_iterations += in.iterations;
    if (!in.converged)
      throw NumericalError("pcg: inner solve (J = K + delta I) failed to converge at outer iteration " +
                           std::to_string(rep.iterations) + ", residual " +
                           std::to_string(in.final_residual_norm));
    return in.solution;
  };

  if (rep.final_residual_norm >= outer_cfg.epsilon) {
    Vector z = inner_solve(r);
    Vector d = z;
    double rz = r.dot(z);
    while (rep.iterations < max_outer) {
      const Vector kd = cmvp(theta, data, d, opts);
      const double dkd = d.dot(kd);
      if (!(dkd > 0.0))
        throw NumericalError("pcg: d^T K d <= 0 at outer iteration " +
                             std::to_string(rep.iterations));
      const double alpha = rz / dkd;
      rep.solution += alpha * d;
      r -= alpha * kd;
      ++rep.iterations;
      rep.final_residual_norm = r.norm();
      if (rep.final_residual_norm < outer_cfg.epsilon) break;
      z = inner_solve(r);
      const double rz_next = r.dot(z);
      d = z + (rz_next / rz) * d;
      rz = rz_next;
    }
  }
  rep.converged = rep.final_residual_norm < outer_cfg.epsilon;
  return rep;
}

namespace {

double lanczos_condition_estimate(const HyperParams& theta, const Dataset& data,
                                  int steps, std::uint64_t seed) {
  const Eigen::Index n = data.n();
  const int m = static_cast<int>(std::min<Eigen::Index>(steps, n));
  RngStream rng(seed == 0 ? 0x5eedULL : seed);
  Vector q = Vector::NullaryExpr(n, [&](Eigen::Index) { return rng.normal(); });
  q.normalize();
  Vector q_prev = Vector::Zero(n);
  std::vector<double> alphas, betas;
  double beta = 0.0;
  for (int j = 0; j < m; ++j) {
    Vector w = cmvp(theta, data, q);
    const double alpha = q.dot(w);
    alphas.push_back(alpha);
    w -= alpha * q + beta * q_prev;
    beta = w.norm();
    if (j + 1 == m || beta < 1e-12 * std::abs(alpha)) break;  // Krylov space exhausted
    betas.push_back(beta);
    q_prev = q;
    q = w / beta;
  }
  const int k = static_cast<int>(alphas.size());
  Matrix t = Matrix::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    t(i, i) = alphas[i];
    if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = betas[i];
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(t, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace

double condition_number(const HyperParams& theta, const Dataset& data,
                        ConditionMode mode, int lanczos_steps,
                        std::uint64_t lanczos_seed) {
  if (mode == ConditionMode::Estimate)
    return lanczos_condition_estimate(theta, data, lanczos_steps, lanczos_seed);
  if (data.n() > kDenseCapacity)
    throw CapacityError("condition_number: exact mode requested for n = " +
                        std::to_string(data.n()) + " > " +
                        std::to_string(kDenseCapacity));
  Eigen::SelfAdjointEigenSolver<Matrix> es(covariance_matrix(theta, data),
                                           Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

std::vector<double> condition_sweep(const Dataset& data, const GammaPrior& prior,
                                    int num_draws, std::uint64_t rng_seed,
                                    std::vector<HyperParams>* draws) {
  return condition_sweep(data, PriorSet{prior, prior, prior}, num_draws, rng_seed,
                         draws);
}

std::vector<double> condition_sweep(const Dataset& data, const PriorSet& priors,
                                    int num_draws, std::uint64_t rng_seed,
                                    std::vector<HyperParams>* draws) {
  priors.sigma.validate();
  priors.tau.validate();
  priors.lambda.validate();
  if (num_draws < 1) throw std::invalid_argument("condition_sweep: num_draws >= 1");
  RngStream rng(rng_seed);
  const ConditionMode mode =
      data.n() <= kDenseCapacity ? ConditionMode::Exact : ConditionMode::Estimate;
  std::vector<double> kappas;
  kappas.reserve(num_draws);
  for (int i = 0; i < num_draws; ++i) {
    const double sigma = rng.gamma(priors.sigma.shape, priors.sigma.rate);
    const double tau = rng.gamma(priors.tau.shape, priors.tau.rate);
    const double lambda = rng.gamma(priors.lambda.shape, priors.lambda.rate);
    const HyperParams theta = HyperParams::from_natural(sigma, tau, lambda);
    if (draws) draws->push_back(theta);
    kappas.push_back(condition_number(theta, data, mode));
  }
  return kappas;
}

}  // namespace gpsgld
