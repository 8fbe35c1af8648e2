#include "kroncov/shrinkage.hpp"

#include <algorithm>
#include <cmath>

namespace kroncov {

double ledoit_wolf_rho(const SampleSet& data) {
  auto [mean, scm] = sample_mean_cov(data);  // validates n >= 2, finiteness
  const int n = data.n();
  const int d = data.dims.window();

  const double m = scm.trace() / d;
  Matrix dev = scm;
  dev.diagonal().array() -= m;
  const double d2 = dev.squaredNorm() / d;
  if (d2 == 0.0) return 1.0;

  // sum_i ||y_i y_i' - S||_F^2 = sum_i ||y_i||^4 - n ||S||_F^2 since the
  // cross terms telescope through S = (1/n) sum y_i y_i'.
  const double s_norm2 = scm.squaredNorm();
  double quartic = 0.0;
  constexpr int kChunk = 256;
  const int chunks = (n + kChunk - 1) / kChunk;
  std::vector<double> partial(chunks, 0.0);
#pragma omp parallel for num_threads(effective_threads()) schedule(static) if (chunks > 1)
  for (int c = 0; c < chunks; ++c) {
    const int lo = c * kChunk;
    const int len = std::min(kChunk, n - lo);
    double acc = 0.0;
    for (int i = 0; i < len; ++i) {
      const double norm2 = (data.samples.row(lo + i).transpose() - mean).squaredNorm();
      acc += norm2 * norm2;
    }
    partial[c] = acc;
  }
  for (double v : partial) quartic += v;

  const double b2_bar = (quartic - n * s_norm2) / (static_cast<double>(n) * n * d);
  const double b2 = std::clamp(b2_bar, 0.0, d2);
  return b2 / d2;
}

ShrinkageResult shrink_covariance(const Matrix& sigma, double rho) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("shrink: rho must be in [0, 1]");
  if (sigma.rows() != sigma.cols()) throw std::invalid_argument("shrink: matrix must be square");
  ShrinkageResult res;
  res.rho = rho;
  res.target_scale = sigma.trace() / static_cast<double>(sigma.rows());
  res.sigma = (1.0 - rho) * sigma;
  res.sigma.diagonal().array() += rho * res.target_scale;
  return res;
}

KronCovModel shrink(const KronCovModel& model, double rho) {
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("shrink: rho must be in [0, 1]");
  KronCovModel out = model;
  out.rho = rho;
  return out;
}

}  // namespace kroncov
