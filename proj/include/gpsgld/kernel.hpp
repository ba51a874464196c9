#pragma once

#include "gpsgld/types.hpp"

namespace gpsgld {

enum class Precision { Double, Single };

/// Options for matrix-free covariance products.
///
/// Rows are processed in fixed-size blocks whose kernel entries are
/// recomputed on the fly; results are block-size independent. The default
/// path is OpenMP-parallel over row blocks with disjoint output writes.
/// deterministic = true forces the serial reference path (fixed scalar
/// reduction order), the mode used for bit-reproducible runs.
struct CmvpOptions {
  Precision precision = Precision::Double;
  int block_size = 256;
  bool deterministic = false;

  CmvpOptions() : deterministic(deterministic_default()) {}
  CmvpOptions(Precision p) : precision(p), deterministic(deterministic_default()) {}

  /// Process-wide default for the deterministic flag (set by the CLI's
  /// --deterministic switch).
  static bool& deterministic_default();
};

/// One covariance entry: sigma * exp(-tau * |xi - xj|^2) + lambda * [same_index].
double kernel_entry(const HyperParams& theta, const Eigen::Ref<const Vector>& xi,
                    const Eigen::Ref<const Vector>& xj, bool same_index);

/// K v without materializing K. O(n^2) time, O(n) space.
Vector cmvp(const HyperParams& theta, const Dataset& data, const Vector& v,
            const CmvpOptions& opts = {});

/// Serial reference product: scalar loops, direct squared distances, fixed
/// accumulation order. Kept as the comparison baseline for the parallel
/// kernels and as the deterministic-mode path.
Vector cmvp_serial(const HyperParams& theta, const Dataset& data, const Vector& v,
                   Precision precision = Precision::Double);

/// (dK/dtheta_sel) v in natural parameter space, matrix-free.
Vector cmvp_derivative(const HyperParams& theta, const Dataset& data,
                       DerivativeSelector sel, const Vector& v,
                       const CmvpOptions& opts = {});

/// (dK/dpsi_sel) v, the log-space derivative with the theta factor folded in
/// at the entry level. Equals theta_sel * cmvp_derivative(...).
Vector cmvp_derivative_log(const HyperParams& theta, const Dataset& data,
                           DerivativeSelector sel, const Vector& v,
                           const CmvpOptions& opts = {});

/// Both (dK/dsigma) v and (dK/dtau) v from one pass over the data; the two
/// derivatives share the exp term, so fusing them halves the cost of a
/// gradient evaluation.
void cmvp_sigma_tau_derivatives(const HyperParams& theta, const Dataset& data,
                                const Vector& v, Vector& dsigma_v, Vector& dtau_v,
                                const CmvpOptions& opts = {});

/// Dense n x n covariance matrix. Used by the exact/oracle paths
/// (log-marginal likelihood, exact gradients, condition numbers), all of
/// which sit behind a capacity guard.
Matrix covariance_matrix(const HyperParams& theta, const Dataset& data);

/// Dense dK/dtheta_sel.
Matrix covariance_derivative_matrix(const HyperParams& theta, const Dataset& data,
                                    DerivativeSelector sel);

}  // namespace gpsgld
