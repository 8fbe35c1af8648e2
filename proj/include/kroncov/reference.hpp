#pragma once

#include <utility>
#include <vector>

#include "kroncov/kron_algebra.hpp"
#include "kroncov/types.hpp"

namespace kroncov::reference {

// Naive single-threaded implementations, written directly from the operator
// definitions. Tests use them as independent oracles for the parallel
// kernels; the benchmark target uses them as the serial baseline.

Matrix kron(const Matrix& a, const Matrix& b);

Matrix rearrange(const Matrix& m, SpaceTimeDims dims);
Matrix derearrange(const Matrix& rm, SpaceTimeDims dims);
Matrix toeplitz_collapse(const Matrix& a, SpaceTimeDims dims);
Matrix toeplitz_embed(const Matrix& at, SpaceTimeDims dims);
Matrix kron_compose(const std::vector<KronFactor>& factors, const Vector& diag_u,
                    SpaceTimeDims dims);

/// Two-pass mean and covariance, plain loops.
std::pair<Vector, Matrix> sample_mean_cov(const Matrix& samples);

/// Gauss-Jordan inverse with partial pivoting.
Matrix invert(const Matrix& a);

/// log|det(a)| via LU with partial pivoting; throws NumericError on a
/// numerically singular matrix or a negative determinant.
double log_det_spd(const Matrix& a);

/// Gaussian log-density evaluated with an explicit inverse.
double gaussian_loglik_dense(const Vector& x, const Vector& mu, const Matrix& sigma);

}  // namespace kroncov::reference
