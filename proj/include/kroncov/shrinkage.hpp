#pragma once

#include "kroncov/estimator.hpp"
#include "kroncov/types.hpp"

namespace kroncov {

struct ShrinkageResult {
  double rho = 0.0;
  double target_scale = 0.0;  // trace(sigma) / dim
  Matrix sigma;
};

/// Ledoit-Wolf weight from the sample covariance statistics:
/// rho = min(b2_bar, d2) / d2, with the dimension-normalized trace target.
/// Returns 1 when the dispersion d2 vanishes.
double ledoit_wolf_rho(const SampleSet& data);

/// (1 - rho) * sigma + rho * (trace(sigma)/dim) * I. Trace-preserving.
ShrinkageResult shrink_covariance(const Matrix& sigma, double rho);

/// Model-level shrinkage: records rho; composition applies it on demand.
KronCovModel shrink(const KronCovModel& model, double rho);

}  // namespace kroncov
