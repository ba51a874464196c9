// Timing comparison of the OpenMP-blocked covariance products against the
// serial reference, plus end-to-end CG. Run manually:
//   ./bench_cmvp [n ...]    (default: 500 1000 2000)
#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "gpsgld/rng.hpp"
#include "gpsgld/solvers.hpp"

using namespace gpsgld;

namespace {

Dataset make_data(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  RngStream rng(seed);
  Dataset data;
  data.X.resize(n, d);
  data.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) data.X(i, k) = rng.normal();
    data.y[i] = rng.normal();
  }
  return data;
}

template <typename F>
double time_op(F&& op, int reps) {
  op();  // warm up
  const double t0 = omp_get_wtime();
  for (int r = 0; r < reps; ++r) op();
  return (omp_get_wtime() - t0) / reps;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Eigen::Index> sizes;
  for (int i = 1; i < argc; ++i) sizes.push_back(std::atol(argv[i]));
  if (sizes.empty()) sizes = {500, 1000, 2000};
  const HyperParams theta = HyperParams::from_natural(1.0, 1.0, 0.1);

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%8s %14s %14s %9s %14s %14s %14s\n", "n", "serial_ms", "parallel_ms",
              "speedup", "single_ms", "cg_serial_ms", "cg_parallel_ms");
  for (Eigen::Index n : sizes) {
    const Dataset data = make_data(n, 8, 42);
    Vector v = Vector::NullaryExpr(n, [](Eigen::Index i) {
      return std::cos(static_cast<double>(i));
    });
    const int reps = n <= 1000 ? 20 : 5;

    CmvpOptions par;
    par.deterministic = false;
    CmvpOptions single(Precision::Single);
    single.deterministic = false;

    volatile double sink = 0.0;
    const double t_serial =
        time_op([&] { sink += cmvp_serial(theta, data, v)[0]; }, reps);
    const double t_par = time_op([&] { sink += cmvp(theta, data, v, par)[0]; }, reps);
    const double t_single =
        time_op([&] { sink += cmvp(theta, data, v, single)[0]; }, reps);

    CmvpOptions det;
    det.deterministic = true;
    const double t_cg_serial =
        time_op([&] { sink += cg_solve(theta, data, data.y, {}, det).solution[0]; }, 2);
    const double t_cg_par =
        time_op([&] { sink += cg_solve(theta, data, data.y, {}, par).solution[0]; }, 2);

    std::printf("%8ld %14.3f %14.3f %9.2f %14.3f %14.1f %14.1f\n",
                static_cast<long>(n), 1e3 * t_serial, 1e3 * t_par, t_serial / t_par,
                1e3 * t_single, 1e3 * t_cg_serial, 1e3 * t_cg_par);
  }
  return 0;
}
