#include "gpsgld/gradients.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace gpsgld {

namespace {

Eigen::LLT<Matrix> cholesky_or_throw(const HyperParams& theta, const Dataset& data) {
  if (data.n() > kDenseCapacity)
    throw CapacityError("dense path requested for n = " + std::to_string(data.n()) +
                        " > " + std::to_string(kDenseCapacity));
  Eigen::LLT<Matrix> llt(covariance_matrix(theta, data));
  if (llt.info() != Eigen::Success)
    throw NumericalError(
        "covariance Cholesky failed (matrix not positive definite under roundoff); "
        "a larger lambda may be needed");
  return llt;
}

}  // namespace

double log_marginal_likelihood(const HyperParams& theta, const Dataset& data) {
  const auto llt = cholesky_or_throw(theta, data);
  const double log_det =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double quad = data.y.dot(llt.solve(data.y));
  const double n = static_cast<double>(data.n());
  return -0.5 * log_det - 0.5 * quad - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

Vector3 exact_gradient(const HyperParams& theta, const Dataset& data,
                       ParamSpace space) {
  const auto llt = cholesky_or_throw(theta, data);
  const Eigen::Index n = data.n();
  const Matrix kinv = llt.solve(Matrix::Identity(n, n));
  const Vector a = llt.solve(data.y);

  Vector3 g;
  for (int i = 0; i < 3; ++i) {
    const auto sel = static_cast<DerivativeSelector>(i);
    double trace, quad;
    if (sel == DerivativeSelector::Lambda) {
      trace = kinv.trace();
      quad = a.squaredNorm();
    } else {
      const Matrix dk = covariance_derivative_matrix(theta, data, sel);
      trace = kinv.cwiseProduct(dk).sum();
      quad = a.dot(dk * a);
    }
    g[i] = -0.5 * trace + 0.5 * quad;
  }
  if (space == ParamSpace::Log) g = g.cwiseProduct(theta.natural());
  return g;
}

Vector rademacher_vector(Eigen::Index n, RngStream& rng) {
  return Vector::NullaryExpr(n, [&](Eigen::Index) { return rng.rademacher(); });
}

GradientEstimate stochastic_gradient(const HyperParams& theta, const Dataset& data,
                                     int num_probes, const UlisseConfig& ulisse_cfg,
                                     RngStream& rng, const std::vector<Vector>* probes,
                                     SolverWarmStart* warm, const CmvpOptions& opts) {
  if (num_probes < 1)
    throw std::invalid_argument("stochastic_gradient: num_probes must be >= 1");
  const Eigen::Index n = data.n();

  GradientEstimate est;
  est.num_probes = num_probes;
  est.probe_seed = rng.id();
  est.sources.trace_probes = true;
  est.sources.roulette =
      ulisse_cfg.early_stop_threshold(n) > ulisse_cfg.base.epsilon;

  std::vector<Vector> drawn;
  if (!probes) {
    drawn.reserve(num_probes);
    for (int i = 0; i < num_probes; ++i) drawn.push_back(rademacher_vector(n, rng));
  } else if (static_cast<int>(probes->size()) != num_probes) {
    throw std::invalid_argument("stochastic_gradient: probes list does not match num_probes");
  }
  const std::vector<Vector>& r = probes ? *probes : drawn;

  if (warm && warm->probe_solutions.size() != static_cast<size_t>(num_probes))
    warm->probe_solutions.assign(num_probes, Vector());

  Vector3 trace_term = Vector3::Zero();
  UlisseConfig probe_cfg = ulisse_cfg;
  probe_cfg.num_replicas = 1;
  Vector dsig(n), dtau(n);
  for (int i = 0; i < num_probes; ++i) {
    if (r[i].size() != n)
      throw std::invalid_argument("stochastic_gradient: probe " + std::to_string(i) +
                                  " has wrong length");
    probe_cfg.base.initial_guess.reset();
    if (warm && warm->probe_solutions[i].size() == n)
      probe_cfg.base.initial_guess = warm->probe_solutions[i];
    UnbiasedSolution sol;
    try {
      sol = ulisse_solve(theta, data, r[i], probe_cfg, rng, opts);
    } catch (const NumericalError& e) {
      throw NumericalError("stochastic_gradient: probe " + std::to_string(i) + ": " +
                           e.what());
    }
    est.solver_iterations += sol.report.iterations;
    if (warm) warm->probe_solutions[i] = sol.report.solution;
    const Vector& z = sol.estimates[0];
    cmvp_sigma_tau_derivatives(theta, data, r[i], dsig, dtau, opts);
    trace_term[0] += z.dot(dsig);
    trace_term[1] += z.dot(dtau);
    trace_term[2] += z.dot(r[i]);  // dK/dlambda = I
  }
  trace_term *= -0.5 / static_cast<double>(num_probes);

  UlisseConfig y_cfg = ulisse_cfg;
  y_cfg.base.initial_guess.reset();
  if (warm && warm->y_solution && warm->y_solution->size() == n)
    y_cfg.base.initial_guess = *warm->y_solution;
  UnbiasedSolution ysol;
  try {
    ysol = paired_ulisse_solve(theta, data, data.y, y_cfg, rng, opts);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("stochastic_gradient: y system: ") + e.what());
  }
  est.solver_iterations += ysol.report.iterations;
  if (warm) warm->y_solution = ysol.report.solution;
  const Vector& u1 = ysol.estimates[0];
  const Vector& u2 = ysol.estimates[1];

  Vector3 quad_term;
  cmvp_sigma_tau_derivatives(theta, data, u2, dsig, dtau, opts);
  quad_term[0] = 0.5 * u1.dot(dsig);
  quad_term[1] = 0.5 * u1.dot(dtau);
  quad_term[2] = 0.5 * u1.dot(u2);

  const Vector3 natural = trace_term + quad_term;
  est.g_tilde = natural.cwiseProduct(theta.natural());
  return est;
}

double gradient_relative_error(const Vector3& exact, const Vector3& estimate) {
  const double denom = exact.squaredNorm();
  if (!(denom > 0.0))
    throw std::invalid_argument("gradient_relative_error: exact gradient is zero");
  return (exact - estimate).squaredNorm() / denom;
}

Vector3 log_prior_gradient(const HyperParams& theta, const PriorSet& priors) {
  Vector3 g;
  for (int i = 0; i < 3; ++i) {
    const GammaPrior& p = priors.component(i);
    g[i] = p.shape - p.rate * theta.component(i);
  }
  return g;
}

double log_prior_psi(const HyperParams& theta, const PriorSet& priors) {
  double lp = 0.0;
  for (int i = 0; i < 3; ++i) {
    const GammaPrior& p = priors.component(i);
    const double t = theta.component(i);
    lp += p.shape * std::log(p.rate) + p.shape * std::log(t) - p.rate * t -
          std::lgamma(p.shape);
  }
  return lp;
}

}  // namespace gpsgld
