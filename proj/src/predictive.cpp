#include "gpsgld/predictive.hpp"

#include <cmath>

namespace gpsgld {

namespace {

Vector cross_covariance(const HyperParams& theta, const Dataset& data,
                        const Eigen::Ref<const Vector>& x_star) {
  if (x_star.size() != data.d())
    throw std::invalid_argument("predict: test input has wrong dimension");
  Vector k(data.n());
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double r2 = (data.X.row(i).transpose() - x_star).squaredNorm();
    k[i] = theta.sigma * std::exp(-theta.tau * r2);
  }
  return k;
}

SolveReport solve_or_throw(const HyperParams& theta, const Dataset& data,
                           const Vector& b, const CmvpOptions& opts) {
  SolveReport rep = cg_solve(theta, data, b, CgConfig{.epsilon = 1e-8}, opts);
  if (!rep.converged)
    throw NumericalError("predict: CG did not converge (residual " +
                         std::to_string(rep.final_residual_norm) + ")");
  return rep;
}

std::vector<long> selected_indices(const SampleChain& chain, long stride,
                                   std::optional<long> burn_in) {
  if (stride < 1) throw std::invalid_argument("predict_mc: stride must be >= 1");
  const long start = burn_in.value_or(chain.burn_in);
  std::vector<long> idx;
  for (long t = start; t < chain.size(); t += stride) idx.push_back(t);
  if (idx.empty())
    throw std::invalid_argument("predict_mc: no post-burn-in samples selected");
  return idx;
}

}  // namespace

std::pair<double, double> predict_at(const HyperParams& theta, const Dataset& data,
                                     const Eigen::Ref<const Vector>& x_star,
                                     const CmvpOptions& opts) {
  const Vector k_star = cross_covariance(theta, data, x_star);
  const Vector alpha = solve_or_throw(theta, data, data.y, opts).solution;
  const Vector kinv_k = solve_or_throw(theta, data, k_star, opts).solution;
  const double mean = k_star.dot(alpha);
  const double variance = (theta.sigma + theta.lambda) - k_star.dot(kinv_k);
  return {mean, variance};
}

std::vector<PredictiveResult> predict_mc_batch(const SampleChain& chain,
                                               const Dataset& data,
                                               const RowMatrix& x_stars, long stride,
                                               std::optional<long> burn_in,
                                               const CmvpOptions& opts) {
  const auto idx = selected_indices(chain, stride, burn_in);
  const Eigen::Index num_points = x_stars.rows();
  std::vector<PredictiveResult> mix(num_points);
  std::vector<double> sum_mean(num_points, 0.0), sum_second(num_points, 0.0);

  for (long t : idx) {
    const HyperParams theta = chain.params_at(t);
    const Vector alpha = solve_or_throw(theta, data, data.y, opts).solution;
    for (Eigen::Index p = 0; p < num_points; ++p) {
      const Vector k_star = cross_covariance(theta, data, x_stars.row(p).transpose());
      const double mean = k_star.dot(alpha);
      const Vector kinv_k = solve_or_throw(theta, data, k_star, opts).solution;
      const double var = (theta.sigma + theta.lambda) - k_star.dot(kinv_k);
      sum_mean[p] += mean;
      sum_second[p] += var + mean * mean;
    }
  }
  const double count = static_cast<double>(idx.size());
  for (Eigen::Index p = 0; p < num_points; ++p) {
    mix[p].mean = sum_mean[p] / count;
    mix[p].variance = sum_second[p] / count - mix[p].mean * mix[p].mean;
  }
  return mix;
}

PredictiveResult predict_mc(const SampleChain& chain, const Dataset& data,
                            const Eigen::Ref<const Vector>& x_star, long stride,
                            std::optional<long> burn_in, bool keep_components,
                            const CmvpOptions& opts) {
  const auto idx = selected_indices(chain, stride, burn_in);
  PredictiveResult out;
  double sum_mean = 0.0, sum_second = 0.0;
  for (long t : idx) {
    const HyperParams theta = chain.params_at(t);
    const auto [mean, var] = predict_at(theta, data, x_star, opts);
    sum_mean += mean;
    sum_second += var + mean * mean;
    if (keep_components) {
      out.component_means.push_back(mean);
      out.component_variances.push_back(var);
    }
  }
  const double count = static_cast<double>(idx.size());
  out.mean = sum_mean / count;
  out.variance = sum_second / count - out.mean * out.mean;
  return out;
}

}  // namespace gpsgld
