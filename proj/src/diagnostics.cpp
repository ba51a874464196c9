#include "gpsgld/diagnostics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpsgld {

PsrfResult psrf(const std::vector<std::span<const double>>& chains) {
  const size_t m = chains.size();
  if (m < 2) throw std::invalid_argument("psrf: need at least 2 chains");
  const size_t n = chains[0].size();
  if (n < 3) throw std::invalid_argument("psrf: chains too short");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("psrf: chains must have equal length");

  std::vector<double> means(m), vars(m);
  for (size_t j = 0; j < m; ++j) {
    double mu = 0.0;
    for (double x : chains[j]) mu += x;
    mu /= static_cast<double>(n);
    double s2 = 0.0;
    for (double x : chains[j]) s2 += (x - mu) * (x - mu);
    means[j] = mu;
    vars[j] = s2 / static_cast<double>(n - 1);
  }
  double grand = 0.0;
  for (double mu : means) grand += mu;
  grand /= static_cast<double>(m);
  double b = 0.0;  // n x variance of the chain means
  for (double mu : means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(n) / static_cast<double>(m - 1);
  double w = 0.0;
  for (double v : vars) w += v;
  w /= static_cast<double>(m);

  if (!(w > 0.0)) {
    const bool spread = b > 0.0;
    return {spread ? std::numeric_limits<double>::infinity() : 1.0, true};
  }
  const double nn = static_cast<double>(n);
  const double var_hat = (nn - 1.0) / nn * w + b / nn;
  return {std::max(1.0, std::sqrt(var_hat / w)), false};
}

std::vector<PsrfResult> psrf_per_parameter(
    const std::vector<std::vector<Vector3>>& chains) {
  std::vector<PsrfResult> out(3);
  std::vector<std::vector<double>> scratch(chains.size());
  for (int p = 0; p < 3; ++p) {
    std::vector<std::span<const double>> views;
    for (size_t j = 0; j < chains.size(); ++j) {
      scratch[j].resize(chains[j].size());
      for (size_t t = 0; t < chains[j].size(); ++t) scratch[j][t] = chains[j][t][p];
      views.emplace_back(scratch[j]);
    }
    out[p] = psrf(views);
  }
  return out;
}

PsrfSummary psrf_summary(const std::vector<PsrfResult>& per_parameter) {
  std::vector<double> vals;
  for (const auto& r : per_parameter) vals.push_back(r.value);
  std::sort(vals.begin(), vals.end());
  auto percentile = [&](double p) {
    if (vals.empty()) return 1.0;
    const double idx = p * static_cast<double>(vals.size() - 1);
    const size_t lo = static_cast<size_t>(idx);
    const size_t hi = std::min(lo + 1, vals.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return vals[lo] * (1.0 - frac) + vals[hi] * frac;
  };
  return {percentile(0.5), percentile(0.975)};
}

EssResult effective_sample_size(std::span<const double> chain) {
  const size_t n = chain.size();
  if (n < 100) throw std::invalid_argument("effective_sample_size: length >= 100 required");
  double mu = 0.0;
  for (double x : chain) mu += x;
  mu /= static_cast<double>(n);
  double c0 = 0.0;
  for (double x : chain) c0 += (x - mu) * (x - mu);
  c0 /= static_cast<double>(n);
  if (!(c0 > 0.0) || c0 <= 1e-28 * (1.0 + mu * mu))  // roundoff-scale variance
    return {0.0, true};

  auto autocorr = [&](size_t k) {
    double c = 0.0;
    for (size_t t = 0; t + k < n; ++t) c += (chain[t] - mu) * (chain[t + k] - mu);
    return c / (static_cast<double>(n) * c0);
  };

  double tau = 1.0;
  for (size_t k = 1; k + 1 < n; k += 2) {
    const double pair = autocorr(k) + autocorr(k + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return {static_cast<double>(n) / tau, false};
}

Matrix3 matrix_sqrt_spd(const Matrix3& m) {
  Eigen::SelfAdjointEigenSolver<Matrix3> es(m);
  if (es.eigenvalues().minCoeff() < 0.0)
    throw NumericalError("matrix_sqrt_spd: matrix has a negative eigenvalue");
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

double langevin_ratio(double eps_t, const Matrix3& M, const Matrix3& V,
                      bool* repaired) {
  if (repaired) *repaired = false;
  Matrix3 v_sym = 0.5 * (V + V.transpose());
  if ((v_sym - V).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + V.cwiseAbs().maxCoeff()) &&
      repaired)
    *repaired = true;
  Eigen::SelfAdjointEigenSolver<Matrix3> ev(v_sym);
  Vector3 lam = ev.eigenvalues();
  if (lam.minCoeff() < 0.0) {
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    if (lam.minCoeff() < -1e-10 * scale)
      throw std::invalid_argument("langevin_ratio: V is not positive semdefinite");
    lam = lam.cwiseMax(0.0);
    v_sym = ev.eigenvectors() * lam.asDiagonal() * ev.eigenvectors().transpose();
    if (repaired) *repaired = true;
  }
  const Matrix3 mhalf = matrix_sqrt_spd(M);
  Eigen::SelfAdjointEigenSolver<Matrix3> es(mhalf * v_sym * mhalf);
  return 0.25 * eps_t * es.eigenvalues().maxCoeff();
}

RunningSummary running_summary(std::span<const double> chain) {
  if (chain.empty()) throw std::invalid_argument("running_summary: empty chain");
  RunningSummary out;
  out.mean.reserve(chain.size());
  out.stddev.reserve(chain.size());
  double mean = 0.0, m2 = 0.0;
  for (size_t t = 0; t < chain.size(); ++t) {
    const double x = chain[t];
    const double d = x - mean;
    mean += d / static_cast<double>(t + 1);
    m2 += d * (x - mean);
    out.mean.push_back(mean);
    out.stddev.push_back(t == 0 ? 0.0 : std::sqrt(m2 / static_cast<double>(t)));
  }
  return out;
}

}  // namespace gpsgld
