#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace gpsgld {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vector3 = Eigen::Vector3d;
using Matrix3 = Eigen::Matrix3d;
// Inputs are stored row-major so that a single point x_i is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Thrown when a computation loses numerical validity (breakdown, failed
/// factorization, divergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a dense-path operation is requested beyond its size guard.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown by the sampler when an update produces non-finite state.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, Vector3 state)
      : NumericalError(what), state(state) {}
  Vector3 state;
};

/// Regression inputs: standardized feature matrix X (n x d) and label
/// vector y (n). The covariance code never materializes anything larger
/// than O(n) from this.
struct Dataset {
  RowMatrix X;
  Vector y;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index d() const { return X.cols(); }

  void validate() const {
    if (n() < 1 || d() < 1) throw std::invalid_argument("dataset: need n >= 1 and d >= 1");
    if (y.size() != n()) throw std::invalid_argument("dataset: label length does not match n");
    if (!X.allFinite() || !y.allFinite())
      throw std::invalid_argument("dataset: non-finite entry");
  }
};

/// Covariance parameters theta = (sigma, tau, lambda): marginal variance,
/// squared-distance decay rate and noise variance. The sampler works on
/// psi = log(theta); natural values are the stored representation.
///
/// sigma = 0 is accepted (pure-noise covariance); tau and lambda must be
/// strictly positive.
struct HyperParams {
  double sigma = 1.0;
  double tau = 1.0;
  double lambda = 0.1;

  static HyperParams from_natural(double sigma, double tau, double lambda) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
      throw std::invalid_argument("hyperparams: sigma must be finite and >= 0");
    if (!(tau > 0.0) || !std::isfinite(tau))
      throw std::invalid_argument("hyperparams: tau must be finite and > 0");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw std::invalid_argument("hyperparams: lambda must be finite and > 0");
    return HyperParams{sigma, tau, lambda};
  }

  static HyperParams from_log(const Vector3& psi) {
    return from_natural(std::exp(psi[0]), std::exp(psi[1]), std::exp(psi[2]));
  }

  Vector3 psi() const { return {std::log(sigma), std::log(tau), std::log(lambda)}; }
  Vector3 natural() const { return {sigma, tau, lambda}; }

  double component(int i) const {
    switch (i) {
      case 0: return sigma;
      case 1: return tau;
      default: return lambda;
    }
  }
};

/// Selects the parameter a covariance derivative is taken with respect to.
enum class DerivativeSelector { Sigma = 0, Tau = 1, Lambda = 2 };

/// Gamma(a, b) prior, shape/rate form: p(t) = b^a t^(a-1) exp(-b t) / Gamma(a).
struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;

  void validate() const {
    if (!(shape > 0.0) || !(rate > 0.0))
      throw std::invalid_argument("gamma prior: shape and rate must be > 0");
  }
};

/// Independent priors on (sigma, tau, lambda).
struct PriorSet {
  GammaPrior sigma, tau, lambda;

  const GammaPrior& component(int i) const {
    switch (i) {
      case 0: return sigma;
      case 1: return tau;
      default: return lambda;
    }
  }
};

}  // namespace gpsgld
