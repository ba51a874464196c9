#include "gpsgld/kernel.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

namespace gpsgld {

bool& CmvpOptions::deterministic_default() {
  static bool flag = false;
  return flag;
}

double kernel_entry(const HyperParams& theta, const Eigen::Ref<const Vector>& xi,
                    const Eigen::Ref<const Vector>& xj, bool same_index) {
  if (xi.size() != xj.size())
    throw std::invalid_argument("kernel_entry: input vectors differ in length");
  if (!xi.allFinite() || !xj.allFinite() || !std::isfinite(theta.sigma) ||
      !std::isfinite(theta.tau) || !std::isfinite(theta.lambda))
    throw std::invalid_argument("kernel_entry: non-finite input");
  const double r2 = (xi - xj).squaredNorm();
  return theta.sigma * std::exp(-theta.tau * r2) + (same_index ? theta.lambda : 0.0);
}

namespace {

// Which weighted sums a pass has to produce: a_i = sum_j exp(-tau r2_ij) v_j
// and optionally t_i = sum_j r2_ij exp(-tau r2_ij) v_j.
struct PassOutputs {
  Vector* exp_sum = nullptr;
  Vector* r2exp_sum = nullptr;
};

constexpr Eigen::Index kColTile = 1024;

// Row-blocked pass using r2_ij = |xi|^2 + |xj|^2 - 2 xi.xj per tile, with
// vectorized exp. Each row block writes a disjoint output slice, so the
// parallel version is reproducible across thread counts.
template <typename Scalar>
void blocked_pass(const Dataset& data, double tau, const Vector& v, int block_size,
                  const PassOutputs& out, bool parallel) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  const Eigen::Index n = data.n();
  const RowMat X = data.X.template cast<Scalar>();
  const Vec vv = v.template cast<Scalar>();
  const Vec norms = X.rowwise().squaredNorm();
  const Scalar tau_s = static_cast<Scalar>(tau);

  const Eigen::Index bs = std::max<Eigen::Index>(1, block_size);
  const Eigen::Index num_blocks = (n + bs - 1) / bs;

#pragma omp parallel for schedule(static) if (parallel && num_blocks > 1)
  for (Eigen::Index blk = 0; blk < num_blocks; ++blk) {
    const Eigen::Index i0 = blk * bs;
    const Eigen::Index b = std::min(bs, n - i0);
    Vec acc_a = Vec::Zero(b);
    Vec acc_t = Vec::Zero(b);
    // Grow-only per-thread scratch keeps the hot path allocation-free.
    static thread_local Mat r2, ex;
    if (r2.rows() < b || r2.cols() < kColTile) {
      r2.resize(std::max(b, r2.rows()), kColTile);
      ex.resize(r2.rows(), kColTile);
    }
    for (Eigen::Index j0 = 0; j0 < n; j0 += kColTile) {
      const Eigen::Index c = std::min(kColTile, n - j0);
      auto r2c = r2.topLeftCorner(b, c);
      r2c.noalias() = Scalar(-2) * X.middleRows(i0, b) * X.middleRows(j0, c).transpose();
      r2c.colwise() += norms.segment(i0, b);
      r2c.rowwise() += norms.segment(j0, c).transpose();
      auto exc = ex.topLeftCorner(b, c);
      exc = (-tau_s * r2c.array()).exp().matrix();
      if (out.exp_sum) acc_a.noalias() += exc * vv.segment(j0, c);
      if (out.r2exp_sum)
        acc_t.noalias() += (r2c.array() * exc.array()).matrix() * vv.segment(j0, c);
    }
    if (out.exp_sum)
      out.exp_sum->segment(i0, b) = acc_a.template cast<double>();
    if (out.r2exp_sum)
      out.r2exp_sum->segment(i0, b) = acc_t.template cast<double>();
  }
}

// Scalar fixed-order pass with direct squared distances; the reference the
// blocked kernels are tested against and the deterministic-mode path.
template <typename Scalar>
void serial_pass(const Dataset& data, double tau, const Vector& v,
                 const PassOutputs& out) {
  const Eigen::Index n = data.n();
  const Eigen::Index d = data.d();
  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const RowMat X = data.X.template cast<Scalar>();
  const Vec vv = v.template cast<Scalar>();
  const Scalar tau_s = static_cast<Scalar>(tau);

  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar* xi = X.data() + i * d;
    Scalar acc_a = 0, acc_t = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const Scalar* xj = X.data() + j * d;
      Scalar r2 = 0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const Scalar diff = xi[k] - xj[k];
        r2 += diff * diff;
      }
      const Scalar e = std::exp(-tau_s * r2) * vv[j];
      acc_a += e;
      acc_t += r2 * e;
    }
    if (out.exp_sum) (*out.exp_sum)[i] = static_cast<double>(acc_a);
    if (out.r2exp_sum) (*out.r2exp_sum)[i] = static_cast<double>(acc_t);
  }
}

void run_pass(const HyperParams& theta, const Dataset& data, const Vector& v,
              const CmvpOptions& opts, const PassOutputs& out) {
  if (v.size() != data.n())
    throw std::invalid_argument("cmvp: vector length does not match dataset size");
  if (opts.deterministic) {
    if (opts.precision == Precision::Double)
      serial_pass<double>(data, theta.tau, v, out);
    else
      serial_pass<float>(data, theta.tau, v, out);
  } else {
    if (opts.precision == Precision::Double)
      blocked_pass<double>(data, theta.tau, v, opts.block_size, out, true);
    else
      blocked_pass<float>(data, theta.tau, v, opts.block_size, out, true);
  }
}

}  // namespace

Vector cmvp(const HyperParams& theta, const Dataset& data, const Vector& v,
            const CmvpOptions& opts) {
  Vector a(data.n());
  run_pass(theta, data, v, opts, {.exp_sum = &a});
  return theta.sigma * a + theta.lambda * v;
}

Vector cmvp_serial(const HyperParams& theta, const Dataset& data, const Vector& v,
                   Precision precision) {
  CmvpOptions opts(precision);
  opts.deterministic = true;
  return cmvp(theta, data, v, opts);
}

Vector cmvp_derivative(const HyperParams& theta, const Dataset& data,
                       DerivativeSelector sel, const Vector& v,
                       const CmvpOptions& opts) {
  if (sel == DerivativeSelector::Lambda) {
    if (v.size() != data.n())
      throw std::invalid_argument("cmvp: vector length does not match dataset size");
    return v;
  }
  if (sel == DerivativeSelector::Sigma) {
    Vector a(data.n());
    run_pass(theta, data, v, opts, {.exp_sum = &a});
    return a;
  }
  Vector t(data.n());
  run_pass(theta, data, v, opts, {.r2exp_sum = &t});
  return -theta.sigma * t;
}

Vector cmvp_derivative_log(const HyperParams& theta, const Dataset& data,
                           DerivativeSelector sel, const Vector& v,
                           const CmvpOptions& opts) {
  switch (sel) {
    case DerivativeSelector::Sigma: {
      Vector a(data.n());
      run_pass(theta, data, v, opts, {.exp_sum = &a});
      return theta.sigma * a;
    }
    case DerivativeSelector::Tau: {
      Vector t(data.n());
      run_pass(theta, data, v, opts, {.r2exp_sum = &t});
      return (-theta.sigma * theta.tau) * t;
    }
    default:
      if (v.size() != data.n())
        throw std::invalid_argument("cmvp: vector length does not match dataset size");
      return theta.lambda * v;
  }
}

void cmvp_sigma_tau_derivatives(const HyperParams& theta, const Dataset& data,
                                const Vector& v, Vector& dsigma_v, Vector& dtau_v,
                                const CmvpOptions& opts) {
  dsigma_v.resize(data.n());
  dtau_v.resize(data.n());
  run_pass(theta, data, v, opts, {.exp_sum = &dsigma_v, .r2exp_sum = &dtau_v});
  dtau_v *= -theta.sigma;
}

Matrix covariance_matrix(const HyperParams& theta, const Dataset& data) {
  const Eigen::Index n = data.n();
  Vector norms = data.X.rowwise().squaredNorm();
  Matrix r2 = -2.0 * data.X * data.X.transpose();
  r2.colwise() += norms;
  r2.rowwise() += norms.transpose();
  Matrix k = theta.sigma * (-theta.tau * r2.array()).exp().matrix();
  k.diagonal().array() += theta.lambda;
  return k;
}

Matrix covariance_derivative_matrix(const HyperParams& theta, const Dataset& data,
                                    DerivativeSelector sel) {
  const Eigen::Index n = data.n();
  if (sel == DerivativeSelector::Lambda) return Matrix::Identity(n, n);
  Vector norms = data.X.rowwise().squaredNorm();
  Matrix r2 = -2.0 * data.X * data.X.transpose();
  r2.colwise() += norms;
  r2.rowwise() += norms.transpose();
  Matrix e = (-theta.tau * r2.array()).exp().matrix();
  if (sel == DerivativeSelector::Sigma) return e;
  return -theta.sigma * (r2.array() * e.array()).matrix();
}

}  // namespace gpsgld
