#pragma once

#include <span>
#include <vector>

#include "gpsgld/types.hpp"

namespace gpsgld {

/// Per-iteration running mean and (sample) standard deviation of a chain,
/// single pass.
struct RunningSummary {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct PsrfResult {
  double value = 1.0;
  bool degenerate = false;  // zero within-chain variance
};

/// Gelman-Rubin potential scale reduction factor for one parameter from
/// m >= 2 equal-length chains: R = sqrt(((n-1)/n W + B/n) / W) with the
/// standard between/within variances B and W, floored at 1 so identical
/// chains report exactly 1.0. Zero within-chain variance is reported as
/// +infinity with the degenerate flag set.
PsrfResult psrf(const std::vector<std::span<const double>>& chains);

/// PSRF for every parameter of a set of vector chains.
std::vector<PsrfResult> psrf_per_parameter(
    const std::vector<std::vector<Vector3>>& chains);

/// Median and 97.5th percentile across the per-parameter PSRF values.
struct PsrfSummary {
  double median = 1.0;
  double p975 = 1.0;
};
PsrfSummary psrf_summary(const std::vector<PsrfResult>& per_parameter);

struct EssResult {
  double value = 0.0;
  bool degenerate = false;  // (near-)constant chain
};

/// Effective sample size N / (1 + 2 sum rho_k), autocorrelations summed
/// until the first negative consecutive pair sum (initial monotone positive
/// sequence estimator).
EssResult effective_sample_size(std::span<const double> chain);

/// Langevin-phase monitor (eps_t / 4) lambda_max(M^1/2 V M^1/2). V is
/// symmetrized and tiny negative eigenvalues are clipped; `repaired`
/// reports when that was needed.
double langevin_ratio(double eps_t, const Matrix3& M, const Matrix3& V,
                      bool* repaired = nullptr);

RunningSummary running_summary(std::span<const double> chain);

/// Symmetric PSD square root via eigendecomposition.
Matrix3 matrix_sqrt_spd(const Matrix3& m);

}  // namespace gpsgld
