#pragma once

#include <optional>
#include <vector>

#include "gpsgld/kernel.hpp"
#include "gpsgld/rng.hpp"
#include "gpsgld/types.hpp"

namespace gpsgld {

/// Conjugate-gradient settings. max_iters <= 0 means the default cap of
/// 10 n, which turns roundoff-induced stalls into reportable failures.
struct CgConfig {
  double epsilon = 1e-8;
  int max_iters = 0;
  std::optional<Vector> initial_guess;

  int resolved_max_iters(Eigen::Index n) const {
    return max_iters > 0 ? max_iters : static_cast<int>(10 * n);
  }
};

struct SolveReport {
  Vector solution;
  int iterations = 0;
  double final_residual_norm = 0.0;
  bool converged = false;
  int roulette_steps = 0;   // 0 for plain CG
  long inner_iterations = 0;  // PCG only
};

/// Step-wise conjugate gradient on K s = b, one covariance product per
/// iteration. Exposed as a class so the unbiased solver can consume the
/// per-iteration increments and tests can inspect the residual sequence.
class CgEngine {
 public:
  CgEngine(const HyperParams& theta, const Dataset& data, Vector b, CgConfig cfg,
           CmvpOptions opts = {});

  /// Performs one iteration (s += alpha d etc.). Returns the increment
  /// alpha_i d_i just applied. Throws NumericalError on d^T K d <= 0.
  const Vector& step();

  double residual_norm() const { return resid_norm_; }
  const Vector& residual() const { return resid_; }
  const Vector& solution() const { return solution_; }
  int iterations() const { return iterations_; }
  int max_iters() const { return max_iters_; }
  bool exhausted() const { return iterations_ >= max_iters_; }

  SolveReport report(double governing_threshold) const;

 private:
  const HyperParams theta_;
  const Dataset& data_;
  CmvpOptions opts_;
  Vector solution_, resid_, direction_, increment_, kd_;
  double resid_norm2_ = 0.0;
  double resid_norm_ = 0.0;
  int iterations_ = 0;
  int max_iters_ = 0;
};

/// Solves K s = b to |b - K s| < cfg.epsilon (absolute Euclidean norm).
SolveReport cg_solve(const HyperParams& theta, const Dataset& data, const Vector& b,
                     const CgConfig& cfg = {}, const CmvpOptions& opts = {});

/// Right-preconditioned CG with J = K + delta I; every outer iteration runs
/// one inner cg_solve on J (the covariance with noise lambda + delta). The
/// outer convergence check uses the true residual of the original system so
/// iteration counts are comparable with plain CG.
SolveReport pcg_solve(const HyperParams& theta, const Dataset& data, const Vector& b,
                      double delta, const CgConfig& outer_cfg = {},
                      const CgConfig& inner_cfg = {}, const CmvpOptions& opts = {});

enum class ConditionMode { Exact, Estimate };

/// Largest dense problem the Exact paths (condition numbers, marginal
/// likelihood, exact gradients) will assemble.
inline constexpr Eigen::Index kDenseCapacity = 4000;

/// kappa = lambda_max(K) / lambda_min(K). Exact assembles K (guarded by
/// kDenseCapacity); Estimate uses extremal Ritz values from m-step Lanczos
/// on covariance products without reorthogonalization, adequate for
/// order-of-magnitude use only.
double condition_number(const HyperParams& theta, const Dataset& data,
                        ConditionMode mode = ConditionMode::Exact,
                        int lanczos_steps = 100, std::uint64_t lanczos_seed = 0);

/// Draws theta componentwise from the prior and returns kappa per draw
/// (Exact mode when n permits, Lanczos estimate otherwise).
std::vector<double> condition_sweep(const Dataset& data, const GammaPrior& prior,
                                    int num_draws, std::uint64_t rng_seed,
                                    std::vector<HyperParams>* draws = nullptr);

/// Variant with independent per-component priors.
std::vector<double> condition_sweep(const Dataset& data, const PriorSet& priors,
                                    int num_draws, std::uint64_t rng_seed,
                                    std::vector<HyperParams>* draws = nullptr);

}  // namespace gpsgld
