// Timing comparison of the parallel kernels against the serial reference
// implementations, with a max-abs-difference check per kernel.

#include <chrono>
#include <cstdio>
#include <functional>

#include "kroncov/estimator.hpp"
#include "kroncov/kron_algebra.hpp"
#include "kroncov/reference.hpp"
#include "kroncov/rng.hpp"
#include "kroncov/types.hpp"

using namespace kroncov;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = rng.normal();
  }
  return m;
}

void report(const char* kernel, const char* size, double serial_ms, double parallel_ms,
            double max_diff) {
  std::printf("%-16s %-14s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   max|diff| %.3e\n",
              kernel, size, serial_ms, parallel_ms, serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main() {
  Rng rng(12345);
  std::printf("threads: %d\n", effective_threads());

  {
    const SpaceTimeDims dims{24, 12};
    const Matrix m = random_matrix(dims.window(), dims.window(), rng);
    Matrix out_par, out_ser;
    const double t_par = time_ms([&] { out_par = rearrange(m, dims).data; }, 20);
    const double t_ser = time_ms([&] { out_ser = reference::rearrange(m, dims); }, 20);
    report("rearrange", "p=24 T=12", t_ser, t_par, (out_par - out_ser).cwiseAbs().maxCoeff());
  }

  {
    const SpaceTimeDims dims{24, 12};
    SampleSet data;
    data.dims = dims;
    data.samples = random_matrix(4000, dims.window(), rng);
    Matrix cov_par, cov_ser;
    const double t_par = time_ms([&] { cov_par = sample_mean_cov(data).second; }, 5);
    const double t_ser =
        time_ms([&] { cov_ser = reference::sample_mean_cov(data.samples).second; }, 5);
    report("sample_mean_cov", "n=4000 d=288", t_ser, t_par,
           (cov_par - cov_ser).cwiseAbs().maxCoeff());
  }

  {
    const SpaceTimeDims dims{32, 8};
    std::vector<KronFactor> factors;
    for (int i = 0; i < 3; ++i) {
      Matrix first_col = random_matrix(dims.T, 1, rng);
      Matrix first_row = random_matrix(dims.T, 1, rng);
      Matrix t(dims.T, dims.T);
      for (int s = 0; s < dims.T; ++s) {
        for (int c = 0; c < dims.T; ++c) {
          t(s, c) = (c >= s) ? first_row(c - s, 0) : first_col(s - c, 0);
        }
      }
      Matrix g = random_matrix(dims.p, dims.p, rng);
      factors.push_back({t, 0.5 * (g + g.transpose())});
    }
    const Vector u = Vector::Ones(dims.p);
    Matrix out_par, out_ser;
    const double t_par = time_ms([&] { out_par = kron_compose(factors, u, dims); }, 20);
    const double t_ser =
        time_ms([&] { out_ser = reference::kron_compose(factors, u, dims); }, 20);
    report("kron_compose", "p=32 T=8 r=3", t_ser, t_par,
           (out_par - out_ser).cwiseAbs().maxCoeff());
  }

  return 0;
}
