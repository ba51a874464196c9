#include <doctest.h>

#include <Eigen/Dense>

#include "gpsgld/diagnostics.hpp"
#include "gpsgld/samplers.hpp"
#include "support/test_data.hpp"

using namespace gpsgld;
using testing::make_dataset;

namespace {

double log_posterior(const Dataset& data, const PriorSet& priors, const Vector3& psi) {
  const HyperParams theta = HyperParams::from_log(psi);
  return log_marginal_likelihood(theta, data) + log_prior_psi(theta, priors);
}

}  // namespace

TEST_CASE("step schedule: calibration hits both endpoints and decays") {
  const auto s = StepSchedule::calibrate(1e-1, 1e-4, 1.0, 40000);
  CHECK(s.eps(1) == doctest::Approx(1e-1).epsilon(1e-12));
  CHECK(s.eps(40000) == doctest::Approx(1e-4).epsilon(1e-12));
  for (long t : {1L, 10L, 100L, 1000L, 39999L})
    CHECK(s.eps(t) > s.eps(t + 1));

  const auto c = StepSchedule::calibrate(0.02, 0.02, 1.0, 100);
  CHECK(c.eps(1) == 0.02);
  CHECK(c.eps(100) == 0.02);

  CHECK_THROWS_AS(StepSchedule::calibrate(1.0, 1e-8, 1.0, 100), std::invalid_argument);
  CHECK_THROWS_AS(StepSchedule::calibrate(1e-1, 1e-4, 0.4, 1000), std::invalid_argument);
}

TEST_CASE("sgld_step: stationary point with suppressed noise stays put") {
  const Vector3 psi(0.3, -0.8, 1.2);
  const Vector3 next =
      sgld_step(psi, Vector3(1.0, -2.0, 0.5), Vector3(-1.0, 2.0, -0.5), 0.01,
                Matrix3::Identity(), Vector3::Zero());
  CHECK((next - psi).norm() == 0.0);
}

TEST_CASE("sgld_step: identity preconditioner without noise is plain ascent") {
  const Vector3 psi(0.0, 0.0, 0.0);
  const Vector3 grad(2.0, -1.0, 4.0);
  const double eps = 1e-3;
  const Vector3 next =
      sgld_step(psi, grad, Vector3::Zero(), eps, Matrix3::Identity(), Vector3::Zero());
  CHECK((next - 0.5 * eps * grad).norm() < 1e-16);
}

TEST_CASE("sgld_step: preconditioned noise has covariance eps M") {
  Matrix3 m;
  m << 2.0, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 0.5;
  const double eps = 0.04;
  RngStream rng(5);
  Matrix3 cov = Matrix3::Zero();
  const int reps = 200000;
  for (int i = 0; i < reps; ++i) {
    const Vector3 step = sgld_step(Vector3::Zero(), Vector3::Zero(), Vector3::Zero(),
                                   eps, m, rng);
    cov += step * step.transpose();
  }
  cov /= reps;
  CHECK((cov - eps * m).cwiseAbs().maxCoeff() < 0.02 * eps * m.norm());
}

TEST_CASE("sgld_step: divergence carries the offending state") {
  const double huge = 1e308;
  CHECK_THROWS_AS(sgld_step(Vector3(huge, 0, 0), Vector3(huge, 0, 0), Vector3::Zero(),
                            2.0, Matrix3::Identity(), Vector3::Zero()),
                  DivergenceError);
}

TEST_CASE("run_sgld: infinite freeze threshold follows the schedule exactly") {
  const Dataset data = make_dataset(50, 3, 3);
  PriorSet priors;
  SgldConfig cfg;
  cfg.total_iters = 220;
  cfg.eps_start = 1e-2;
  cfg.eps_end = 1e-3;
  cfg.freeze_threshold = std::numeric_limits<double>::infinity();
  cfg.variance_batch = 50;
  RngStream rng(7);
  const SampleChain chain = run_sgld(data, priors, cfg, Vector3::Zero(), rng);
  REQUIRE(chain.size() == 220);
  CHECK_FALSE(chain.frozen_at.has_value());
  const auto schedule = StepSchedule::calibrate(1e-2, 1e-3, 1.0, 220);
  for (long t = 0; t < chain.size(); ++t)
    CHECK(chain.step_sizes[t] == doctest::Approx(schedule.eps(t + 1)).epsilon(1e-15));
}

TEST_CASE("run_sgld: freeze pins the step size from frozen_at onward") {
  const Dataset data = make_dataset(50, 3, 5);
  PriorSet priors;
  SgldConfig cfg;
  cfg.total_iters = 300;
  cfg.eps_start = 1e-3;
  cfg.eps_end = 1e-4;
  cfg.freeze_threshold = 10.0;  // triggers at the first variance batch
  cfg.variance_batch = 40;
  RngStream rng(11);
  const SampleChain chain = run_sgld(data, priors, cfg, Vector3::Zero(), rng);
  REQUIRE(chain.frozen_at.has_value());
  CHECK(*chain.frozen_at == 40);
  const double pinned = chain.step_sizes[*chain.frozen_at - 1];
  for (long t = *chain.frozen_at; t < chain.size(); ++t)
    CHECK(chain.step_sizes[t] == pinned);
  CHECK_FALSE(chain.gradient_variance.empty());
  CHECK(chain.burn_in == *chain.frozen_at);
}

TEST_CASE("run_sgld: exact-gradient, noise-free mode is an ascent") {
  const Dataset data = make_dataset(60, 4, 13);
  PriorSet priors;
  SgldConfig cfg;
  cfg.total_iters = 260;
  cfg.eps_start = 5e-3;
  cfg.eps_end = 1e-3;
  cfg.gradient_mode = GradientMode::Exact;
  cfg.inject_noise = false;
  cfg.freeze_threshold = std::numeric_limits<double>::infinity();
  RngStream rng(17);
  const SampleChain chain = run_sgld(data, priors, cfg, Vector3(0.5, 0.5, -1.0), rng);
  REQUIRE(chain.size() == 260);
  double prev = log_posterior(data, priors, chain.samples[99]);
  for (long t = 199; t < chain.size(); t += 100) {
    const double lp = log_posterior(data, priors, chain.samples[t]);
    CHECK(lp >= prev - 1e-3);
    prev = lp;
  }
}

TEST_CASE("run_sgld: bit-identical chains for identical seeds in deterministic mode") {
  const Dataset data = make_dataset(40, 3, 19);
  PriorSet priors;
  SgldConfig cfg;
  cfg.total_iters = 60;
  cfg.eps_start = 1e-3;
  cfg.eps_end = 1e-4;
  CmvpOptions det;
  det.deterministic = true;
  RngStream r1(23), r2(23);
  const SampleChain a = run_sgld(data, priors, cfg, Vector3::Zero(), r1, det);
  const SampleChain b = run_sgld(data, priors, cfg, Vector3::Zero(), r2, det);
  REQUIRE(a.size() == b.size());
  for (long t = 0; t < a.size(); ++t)
    CHECK((a.samples[t] - b.samples[t]).norm() == 0.0);
}

TEST_CASE("mh: zero proposal scale keeps the chain constant with full acceptance") {
  const Dataset data = make_dataset(30, 3, 29);
  PriorSet priors;
  MhConfig cfg;
  cfg.num_iters = 50;
  cfg.proposal_scale = 0.0;
  cfg.adapt = false;
  RngStream rng(31);
  const Vector3 init(0.1, -0.2, -1.0);
  const SampleChain chain = mh_sample(data, priors, cfg, init, rng);
  for (long t = 0; t < chain.size(); ++t) {
    CHECK((chain.samples[t] - init).norm() == 0.0);
    CHECK(chain.accepted[t] == 1);
  }
}

TEST_CASE("mh: adaptation lands the acceptance rate in [0.2, 0.4]") {
  const Dataset data = make_dataset(40, 3, 37);
  PriorSet priors;
  MhConfig cfg;
  cfg.num_iters = 4000;
  cfg.proposal_scale = 5.0;  // far too large; adaptation has to shrink it
  cfg.adapt = true;
  RngStream rng(41);
  const SampleChain chain = mh_sample(data, priors, cfg, Vector3::Zero(), rng);
  long accepts = 0;
  for (long t = chain.size() / 2; t < chain.size(); ++t) accepts += chain.accepted[t];
  const double rate = static_cast<double>(accepts) / (chain.size() - chain.size() / 2);
  CHECK(rate > 0.12);
  CHECK(rate < 0.48);
}

TEST_CASE("mh: restricted lambda-only chain matches 1-D quadrature") {
  const Dataset data = make_dataset(50, 4, 43);
  PriorSet priors;
  const double sigma0 = 1.0, tau0 = 1.0;

  // Quadrature oracle over psi_lambda on a wide grid.
  const int grid = 1500;
  const double lo = -7.0, hi = 4.0;
  double z = 0.0, mean = 0.0, max_lp = -1e300;
  std::vector<double> lps(grid), xs(grid);
  for (int i = 0; i < grid; ++i) {
    xs[i] = lo + (hi - lo) * i / (grid - 1.0);
    lps[i] = log_posterior(data, priors, Vector3(std::log(sigma0), std::log(tau0), xs[i]));
    max_lp = std::max(max_lp, lps[i]);
  }
  for (int i = 0; i < grid; ++i) {
    const double w = std::exp(lps[i] - max_lp);
    z += w;
    mean += xs[i] * w;
  }
  mean /= z;

  MhConfig cfg;
  cfg.num_iters = 20000;
  cfg.burn_in = 2000;
  cfg.proposal_scale = 0.6;
  cfg.update_mask = {false, false, true};
  RngStream rng(47);
  const SampleChain chain =
      mh_sample(data, priors, cfg, Vector3(std::log(sigma0), std::log(tau0), 0.0), rng);

  std::vector<double> lam;
  for (long t = cfg.burn_in; t < chain.size(); ++t) {
    CHECK(chain.samples[t][0] == std::log(sigma0));  // masked coordinates fixed
    lam.push_back(chain.samples[t][2]);
  }
  const auto ess = effective_sample_size(lam);
  REQUIRE_FALSE(ess.degenerate);
  double m = 0.0, s2 = 0.0;
  for (double x : lam) m += x;
  m /= lam.size();
  for (double x : lam) s2 += (x - m) * (x - m);
  s2 /= (lam.size() - 1.0);
  const double se = std::sqrt(s2 / ess.value);
  CHECK(std::abs(m - mean) <= 2.0 * se);
}

TEST_CASE("map: recovers a stationary point with small gradient") {
  const Dataset data = make_dataset(300, 6, 53);
  PriorSet priors;
  const MapResult res = map_estimate(data, priors, Vector3::Zero(), 400);
  CHECK(res.converged);
  CHECK(res.gradient_norm < 1e-6);

  const MapResult again = map_estimate(data, priors, Vector3::Zero(), 400);
  CHECK((res.params.psi() - again.params.psi()).norm() == 0.0);  // deterministic
}

TEST_CASE("map: identity-covariance lambda root") {
  const Dataset data = make_dataset(70, 3, 59);
  PriorSet priors;  // Gamma(1, 1) everywhere
  const double yy = data.y.squaredNorm();
  const double n = 70.0;
  // psi-space stationarity at sigma = 0:
  //   -n/2 + y'y/(2 lambda) + 1 - lambda = 0
  const double b = 0.5 * n - 1.0;
  const double root = 0.5 * (-b + std::sqrt(b * b + 2.0 * yy));
  const HyperParams at_root = HyperParams::from_natural(0.0, 1.0, root);
  const double total = exact_gradient(at_root, data, ParamSpace::Log)[2] +
                       log_prior_gradient(at_root, priors)[2];
  CHECK(std::abs(total) < 1e-9);
}

TEST_CASE("preconditioner: synthetic quadratic posterior with known Hessian") {
  Matrix3 h;
  h << -4.0, 0.5, 0.1, 0.5, -2.0, -0.3, 0.1, -0.3, -1.0;
  const Vector3 mu(0.2, -0.5, 1.0);
  auto grad = [&](const Vector3& psi) { return Vector3(h * (psi - mu)); };
  const Matrix3 fd = hessian_fd(grad, mu, 1e-4);
  CHECK((fd - h).cwiseAbs().maxCoeff() < 1e-8);
  const PreconditionerResult pre = preconditioner_from_hessian(fd);
  CHECK_FALSE(pre.repaired);
  const Matrix3 want = (-h).inverse();
  CHECK((pre.M - want).cwiseAbs().maxCoeff() < 1e-4 * want.norm());
}

TEST_CASE("preconditioner: output is symmetric positive definite; repair flagged") {
  const Dataset data = make_dataset(80, 4, 61);
  PriorSet priors;
  const MapResult map = map_estimate(data, priors, Vector3::Zero(), 300);
  const PreconditionerResult pre = estimate_preconditioner(data, priors, map.params);
  CHECK((pre.M - pre.M.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  Eigen::SelfAdjointEigenSolver<Matrix3> es(pre.M);
  CHECK(es.eigenvalues().minCoeff() > 0.0);

  // An indefinite Hessian must be clipped and flagged.
  Matrix3 indefinite = Matrix3::Identity();
  indefinite(0, 0) = -3.0;
  const PreconditionerResult repaired = preconditioner_from_hessian(indefinite);
  CHECK(repaired.repaired);
  Eigen::SelfAdjointEigenSolver<Matrix3> es2(repaired.M);
  CHECK(es2.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("sgld config validation") {
  SgldConfig cfg;
  cfg.preconditioner << 1.0, 2.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 1.0;  // indefinite
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.preconditioner = Matrix3::Identity();
  cfg.variance_batch = 1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
