#pragma once

#include <optional>
#include <vector>

#include "gpsgld/ulisse.hpp"

namespace gpsgld {

enum class ParamSpace { Natural, Log };

/// Stochastic gradient of the log-marginal likelihood plus bookkeeping.
struct GradientEstimate {
  Vector3 g_tilde = Vector3::Zero();  // log-space gradient
  int num_probes = 0;
  long solver_iterations = 0;
  std::uint64_t probe_seed = 0;
  struct Sources {
    bool trace_probes = false;
    bool roulette = false;
  } sources;
};

/// Warm-start slots carried across sampler iterations while the probe
/// vectors are held fixed; cleared whenever probes are redrawn.
struct SolverWarmStart {
  std::vector<Vector> probe_solutions;
  std::optional<Vector> y_solution;
  void clear() {
    probe_solutions.clear();
    y_solution.reset();
  }
};

/// Dense log-marginal likelihood -log|K|/2 - y' K^-1 y / 2 - n log(2 pi)/2,
/// via one Cholesky factorization. Guarded by kDenseCapacity.
double log_marginal_likelihood(const HyperParams& theta, const Dataset& data);

/// Dense gradient g_i = -tr(K^-1 dK/dtheta_i)/2 + y' K^-1 (dK/dtheta_i) K^-1 y / 2.
/// Log space multiplies component i by theta_i.
Vector3 exact_gradient(const HyperParams& theta, const Dataset& data,
                       ParamSpace space = ParamSpace::Natural);

/// Unbiased stochastic gradient (log space): the trace term is estimated
/// with num_probes Rademacher vectors solved through ulisse_solve, the
/// quadratic term with two conditionally independent estimates of K^-1 y
/// from one paired solve. The same probes and solves are shared across all
/// three parameter components.
///
/// If `probes` is supplied it must hold num_probes vectors of length n and
/// no probe randomness is consumed. `warm`, when given, provides CG initial
/// guesses and receives the updated solver iterates.
GradientEstimate stochastic_gradient(const HyperParams& theta, const Dataset& data,
                                     int num_probes, const UlisseConfig& ulisse_cfg,
                                     RngStream& rng,
                                     const std::vector<Vector>* probes = nullptr,
                                     SolverWarmStart* warm = nullptr,
                                     const CmvpOptions& opts = {});

/// |g - g_est|^2 / |g|^2.
double gradient_relative_error(const Vector3& exact, const Vector3& estimate);

/// Gradient of log p(psi) for independent Gamma priors including the
/// exp-transform Jacobian: component i = a_i - b_i theta_i.
Vector3 log_prior_gradient(const HyperParams& theta, const PriorSet& priors);

/// log p(psi) itself (normalized), used by the MH acceptance ratio and the
/// MAP objective.
double log_prior_psi(const HyperParams& theta, const PriorSet& priors);

/// Draws a Rademacher probe vector of length n.
Vector rademacher_vector(Eigen::Index n, RngStream& rng);

}  // namespace gpsgld
