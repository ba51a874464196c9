#pragma once

#include <optional>

#include "gpsgld/samplers.hpp"

namespace gpsgld {

/// Gaussian-mixture predictive moments at one test input, mixing the
/// per-sample conditionals over posterior draws.
struct PredictiveResult {
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> component_means;      // retained when keep_components
  std::vector<double> component_variances;
};

/// GP predictive at x_star under fixed theta: mean = k*' K^-1 y and
/// variance = (sigma + lambda) - k*' K^-1 k*, with k*_i =
/// sigma exp(-tau |x_i - x*|^2). The noise variance is included because the
/// prediction is for a noisy label; all K^-1 applications go through
/// cg_solve at threshold 1e-8.
std::pair<double, double> predict_at(const HyperParams& theta, const Dataset& data,
                                     const Eigen::Ref<const Vector>& x_star,
                                     const CmvpOptions& opts = {});

/// Monte Carlo predictive over every stride-th post-burn-in sample of the
/// chain: mixture mean is the average of component means, mixture variance
/// is avg(var + mean^2) - (mixture mean)^2. burn_in overrides the chain's
/// own convention when given.
PredictiveResult predict_mc(const SampleChain& chain, const Dataset& data,
                            const Eigen::Ref<const Vector>& x_star, long stride = 1,
                            std::optional<long> burn_in = std::nullopt,
                            bool keep_components = false,
                            const CmvpOptions& opts = {});

/// Batched variant: one K^-1 y solve per theta sample shared across all
/// test points. Rows of x_stars are test inputs.
std::vector<PredictiveResult> predict_mc_batch(const SampleChain& chain,
                                               const Dataset& data,
                                               const RowMatrix& x_stars,
                                               long stride = 1,
                                               std::optional<long> burn_in = std::nullopt,
                                               const CmvpOptions& opts = {});

}  // namespace gpsgld
