#pragma once

#include <vector>

#include "gpsgld/rng.hpp"
#include "gpsgld/solvers.hpp"

namespace gpsgld {

/// Unbiased linear-system solver settings. CG is stopped once the residual
/// norm first drops below alpha = q sqrt(n) and then continued
/// stochastically: continuation step j is taken with probability 1/w_j,
/// w_j = exp(beta j), and an accepted increment is scaled by prod_{r<=j} w_r
/// so the returned estimate is unbiased for the exact solution.
///
/// If alpha <= base.epsilon the roulette never engages and the solve
/// degenerates to plain CG, which must then be exact.
struct UlisseConfig {
  double q = 1.0;
  double beta = 1.0;
  CgConfig base;
  int num_replicas = 1;

  double early_stop_threshold(Eigen::Index n) const {
    return q * std::sqrt(static_cast<double>(n));
  }
};

/// Result of one unbiased solve. `report.solution` is the plain CG iterate
/// at the point the solver stopped (useful as a warm start), while
/// `estimates` hold the roulette-weighted unbiased estimates, one per
/// replica. `l` is the iteration at which the residual first dropped below
/// the early-stop threshold; `roulette_steps[k]` counts the continuation
/// increments replica k accumulated.
struct UnbiasedSolution {
  std::vector<Vector> estimates;
  int l = 0;
  std::vector<int> roulette_steps;
  SolveReport report;
};

/// Runs CG with early stop + roulette continuation. All replicas share one
/// CG trajectory and differ only in their independent roulette draws, so
/// the cost of extra replicas is O(n) bookkeeping, not extra covariance
/// products. E[estimate] equals the exact solution (up to the epsilon-level
/// truncation of CG itself).
UnbiasedSolution ulisse_solve(const HyperParams& theta, const Dataset& data,
                              const Vector& b, const UlisseConfig& cfg,
                              RngStream& rng, const CmvpOptions& opts = {});

/// ulisse_solve with exactly two replicas; the two estimates are
/// conditionally independent given the CG trajectory, as required for the
/// unbiased quadratic term of the gradient.
UnbiasedSolution paired_ulisse_solve(const HyperParams& theta, const Dataset& data,
                                     const Vector& b, UlisseConfig cfg, RngStream& rng,
                                     const CmvpOptions& opts = {});

/// Mean number of continuation steps, sum_j exp(-beta j (j+1) / 2). Used by
/// the roulette-length diagnostics and tests.
double expected_roulette_steps(double beta);

}  // namespace gpsgld
