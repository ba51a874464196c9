#include "gpsgld/ulisse.hpp"

#include <cmath>

namespace gpsgld {

UnbiasedSolution ulisse_solve(const HyperParams& theta, const Dataset& data,
                              const Vector& b, const UlisseConfig& cfg, RngStream& rng,
                              const CmvpOptions& opts) {
  if (cfg.num_replicas < 1)
    throw std::invalid_argument("ulisse: num_replicas must be >= 1");
  if (!(cfg.q > 0.0) || !(cfg.beta > 0.0))
    throw std::invalid_argument("ulisse: q and beta must be > 0");

  const double alpha = cfg.early_stop_threshold(data.n());
  const double epsilon = cfg.base.epsilon;
  CgEngine engine(theta, data, b, cfg.base, opts);

  // Phase 1: deterministic CG until the residual first drops below alpha.
  while (engine.residual_norm() >= alpha && engine.residual_norm() >= epsilon &&
         !engine.exhausted())
    engine.step();

  UnbiasedSolution out;
  out.l = engine.iterations();
  out.roulette_steps.assign(cfg.num_replicas, 0);
  out.estimates.assign(cfg.num_replicas, engine.solution());

  std::vector<RngStream> streams;
  streams.reserve(cfg.num_replicas);
  for (int k = 0; k < cfg.num_replicas; ++k) streams.push_back(rng.split());

  // Phase 2: roulette continuation. Replica k takes step j iff
  // u < 1/w_j with w_j = exp(beta j); w_0 = 1 forces the first step.
  // All live replicas advance in lockstep so one CG trajectory serves all.
  std::vector<char> alive(cfg.num_replicas, 1);
  double log_weight_product = 0.0;  // log prod_{r<=j} w_r = beta j(j+1)/2
  for (int j = 0;; ++j) {
    bool any = false;
    for (int k = 0; k < cfg.num_replicas; ++k) {
      if (!alive[k]) continue;
      const double accept_prob = std::exp(-cfg.beta * j);
      if (streams[k].uniform() < accept_prob)
        any = true;
      else
        alive[k] = 0;
    }
    // Replicas that wanted a step but find CG fully converged (or out of
    // budget) take the remaining tail, which at that point is below the
    // epsilon-level truncation of the baseline solver.
    if (!any || engine.residual_norm() < epsilon || engine.exhausted()) break;
    const Vector& delta = engine.step();
    log_weight_product += cfg.beta * j;
    const double w = std::exp(log_weight_product);
    for (int k = 0; k < cfg.num_replicas; ++k)
      if (alive[k]) {
        out.estimates[k] += w * delta;
        out.roulette_steps[k] = j + 1;
      }
  }

  const double governing = std::max(alpha, epsilon);
  out.report = engine.report(governing);
  int max_steps = 0;
  for (int s : out.roulette_steps) max_steps = std::max(max_steps, s);
  out.report.roulette_steps = max_steps;
  return out;
}

UnbiasedSolution paired_ulisse_solve(const HyperParams& theta, const Dataset& data,
                                     const Vector& b, UlisseConfig cfg, RngStream& rng,
                                     const CmvpOptions& opts) {
  cfg.num_replicas = 2;
  return ulisse_solve(theta, data, b, cfg, rng, opts);
}

double expected_roulette_steps(double beta) {
  double sum = 0.0;
  for (int j = 0;; ++j) {
    const double term = std::exp(-beta * 0.5 * j * (j + 1));
    sum += term;
    if (term < 1e-300 || term < 1e-18 * sum) break;
  }
  return sum;
}

}  // namespace gpsgld
