#include "kroncov/kron_algebra.hpp"

#include <cmath>
#include <cstdlib>

namespace kroncov {

namespace {

void require_finite_dims(const Matrix& m, SpaceTimeDims dims) {
  const Eigen::Index n = static_cast<Eigen::Index>(dims.p) * dims.T;
  if (m.rows() != n || m.cols() != n) {
    throw std::invalid_argument("rearrange: matrix must be pT x pT for the given dims");
  }
}

}  // namespace

RearrangedMatrix rearrange(const Matrix& m, SpaceTimeDims dims) {
  dims.validate();
  require_finite_dims(m, dims);
  const int p = dims.p, T = dims.T;
  Matrix out(T * T, p * p);
  // Disjoint writes per output column; deterministic for any thread count.
#pragma omp parallel for num_threads(effective_threads()) if (p * p * T * T > 4096)
  for (int c = 0; c < p * p; ++c) {
    const int a = c % p;
    const int b = c / p;
    for (int t = 0; t < T; ++t) {
      for (int s = 0; s < T; ++s) {
        out(s + T * t, c) = m(s * p + a, t * p + b);
      }
    }
  }
  return RearrangedMatrix{dims, std::move(out)};
}

Matrix derearrange(const RearrangedMatrix& rm) {
  rm.validate();
  const int p = rm.dims.p, T = rm.dims.T;
  Matrix out(p * T, p * T);
#pragma omp parallel for num_threads(effective_threads()) if (p * p * T * T > 4096)
  for (int c = 0; c < p * p; ++c) {
    const int a = c % p;
    const int b = c / p;
    for (int t = 0; t < T; ++t) {
      for (int s = 0; s < T; ++s) {
        out(s * p + a, t * p + b) = rm.data(s + T * t, c);
      }
    }
  }
  return out;
}

ToeplitzCollapsed toeplitz_collapse(const RearrangedMatrix& a) {
  a.validate();
  const int p = a.dims.p, T = a.dims.T;
  Matrix out(2 * T - 1, p * p);
#pragma omp parallel for num_threads(effective_threads()) if ((2 * T - 1) * p * p > 4096)
  for (int j = -(T - 1); j <= T - 1; ++j) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(p * p);
    // members of offset j: (s, t) with t - s = j
    for (int s = std::max(0, -j); s < T - std::max(0, j); ++s) {
      const int t = s + j;
      acc += a.data.row(s + T * t);
    }
    out.row(j + T - 1) = acc / std::sqrt(static_cast<double>(T - std::abs(j)));
  }
  return ToeplitzCollapsed{a.dims, std::move(out)};
}

RearrangedMatrix toeplitz_embed(const ToeplitzCollapsed& at) {
  at.validate();
  const int p = at.dims.p, T = at.dims.T;
  Matrix out(T * T, p * p);
#pragma omp parallel for num_threads(effective_threads()) if (T * T * p * p > 4096)
  for (int k = 0; k < T * T; ++k) {
    const int s = k % T;
    const int t = k / T;
    const int j = t - s;
    out.row(k) = at.data.row(j + T - 1) / std::sqrt(static_cast<double>(T - std::abs(j)));
  }
  return RearrangedMatrix{at.dims, std::move(out)};
}

DiagMask build_diag_mask(SpaceTimeDims dims) {
  dims.validate();
  const int p = dims.p, T = dims.T;
  Matrix full = Matrix::Ones(T * T, p * p);
  for (int t = 0; t < T; ++t) {
    const int k = t + T * t;  // offset-0 rows
    for (int a = 0; a < p; ++a) {
      full(k, a * (p + 1)) = 0.0;
    }
  }
  Matrix collapsed = Matrix::Ones(2 * T - 1, p * p);
  for (int a = 0; a < p; ++a) {
    collapsed(T - 1, a * (p + 1)) = 0.0;
  }
  return DiagMask{dims, std::move(full), std::move(collapsed)};
}

Matrix kron_compose(const std::vector<KronFactor>& factors, const Vector& diag_u,
                    SpaceTimeDims dims) {
  dims.validate();
  const int p = dims.p, T = dims.T;
  if (diag_u.size() != p) {
    throw std::invalid_argument("kron_compose: diag vector must have length p");
  }
  if (!diag_u.allFinite()) {
    throw std::invalid_argument("kron_compose: non-finite diagonal entries");
  }
  for (const auto& f : factors) {
    if (f.temporal.rows() != T || f.temporal.cols() != T) {
      throw std::invalid_argument("kron_compose: temporal factor must be T x T");
    }
    if (f.spatial.rows() != p || f.spatial.cols() != p) {
      throw std::invalid_argument("kron_compose: spatial factor must be p x p");
    }
    if (!is_toeplitz(f.temporal)) {
      throw std::invalid_argument("kron_compose: temporal factor is not Toeplitz");
    }
  }
  const int n = p * T;
  Matrix out(n, n);
#pragma omp parallel for num_threads(effective_threads()) if (n > 64)
  for (int col = 0; col < n; ++col) {
    const int t = col / p;
    const int b = col % p;
    for (int row = 0; row < n; ++row) {
      const int s = row / p;
      const int a = row % p;
      double acc = 0.0;
      for (const auto& f : factors) {
        acc += f.temporal(s, t) * f.spatial(a, b);
      }
      if (s == t && a == b) acc += diag_u(a);
      out(row, col) = acc;
    }
  }
  return out;
}

Matrix temporal_factor_from_collapsed(const Vector& offsets, int T) {
  if (offsets.size() != 2 * T - 1) {
    throw std::invalid_argument("temporal_factor_from_collapsed: need 2T-1 offsets");
  }
  Matrix out(T, T);
  for (int t = 0; t < T; ++t) {
    for (int s = 0; s < T; ++s) {
      const int j = t - s;
      out(s, t) = offsets(j + T - 1) / std::sqrt(static_cast<double>(T - std::abs(j)));
    }
  }
  return out;
}

bool is_toeplitz(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const int n = static_cast<int>(m.rows());
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (int j = -(n - 1); j <= n - 1; ++j) {
    const int s0 = std::max(0, -j);
    const double v = m(s0, s0 + j);
    for (int s = s0; s < n - std::max(0, j); ++s) {
      if (std::abs(m(s, s + j) - v) > tol * scale) return false;
    }
  }
  return true;
}

bool is_block_toeplitz(const Matrix& m, SpaceTimeDims dims, double tol) {
  const int p = dims.p, T = dims.T;
  if (m.rows() != static_cast<Eigen::Index>(p) * T || m.cols() != m.rows()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (int j = -(T - 1); j <= T - 1; ++j) {
    const int s0 = std::max(0, -j);
    const auto ref = m.block(s0 * p, (s0 + j) * p, p, p);
    for (int s = s0; s < T - std::max(0, j); ++s) {
      if (((m.block(s * p, (s + j) * p, p, p) - ref).cwiseAbs().maxCoeff()) > tol * scale) {
        return false;
      }
    }
  }
  return true;
}

}  // namespace kroncov
