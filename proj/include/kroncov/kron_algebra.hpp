#pragma once

#include <vector>

#include "kroncov/types.hpp"

namespace kroncov {

// Index conventions (0-based throughout):
//   A pT x pT matrix is a T x T grid of p x p blocks; block (s,t) occupies
//   rows [s*p, (s+1)*p) and columns [t*p, (t+1)*p).
//   Rearranged row index   k = s + T*t          (s fastest)
//   Rearranged col index   c = a + p*b          (column-major block entry (a,b))
//   Block-diagonal offset  j = t - s, j in [-(T-1), T-1]; offset j maps to
//   collapsed row j + T - 1 and has T - |j| members.

/// T^2 x p^2 rearrangement of a pT x pT matrix; row k holds vec(block(s,t)).
struct RearrangedMatrix {
  SpaceTimeDims dims;
  Matrix data;  // T^2 x p^2

  void validate() const {
    dims.validate();
    if (data.rows() != static_cast<Eigen::Index>(dims.T) * dims.T ||
        data.cols() != static_cast<Eigen::Index>(dims.p) * dims.p) {
      throw std::invalid_argument("RearrangedMatrix: shape must be T^2 x p^2");
    }
  }
};

/// (2T-1) x p^2 matrix of offset-aggregated rearranged rows, weight 1/sqrt(T-|j|).
struct ToeplitzCollapsed {
  SpaceTimeDims dims;
  Matrix data;  // (2T-1) x p^2

  void validate() const {
    dims.validate();
    if (data.rows() != 2 * static_cast<Eigen::Index>(dims.T) - 1 ||
        data.cols() != static_cast<Eigen::Index>(dims.p) * dims.p) {
      throw std::invalid_argument("ToeplitzCollapsed: shape must be (2T-1) x p^2");
    }
  }
};

/// 0/1 masks excluding the pT global diagonal entries of the covariance:
/// full_mask zero at (k in offset-0 rows, c in {a*(p+1)}), collapsed_mask the
/// sign of its collapse (zero at row T-1, same columns).
struct DiagMask {
  SpaceTimeDims dims;
  Matrix full_mask;       // T^2 x p^2
  Matrix collapsed_mask;  // (2T-1) x p^2
};

/// One temporal (T x T Toeplitz) times spatial (p x p symmetric) term.
struct KronFactor {
  Matrix temporal;
  Matrix spatial;
};

RearrangedMatrix rearrange(const Matrix& m, SpaceTimeDims dims);

/// Exact inverse of rearrange.
Matrix derearrange(const RearrangedMatrix& rm);

ToeplitzCollapsed toeplitz_collapse(const RearrangedMatrix& a);

/// Adjoint of toeplitz_collapse; collapse(embed(x)) == x.
RearrangedMatrix toeplitz_embed(const ToeplitzCollapsed& at);

DiagMask build_diag_mask(SpaceTimeDims dims);

/// sum_i T_i (x) S_i + I_T (x) diag(u). Rejects non-Toeplitz temporal factors.
Matrix kron_compose(const std::vector<KronFactor>& factors, const Vector& diag_u,
                    SpaceTimeDims dims);

/// T x T Toeplitz factor from a (2T-1)-vector of collapsed offset entries:
/// out(s,t) = offsets[(t-s) + T - 1] / sqrt(T - |t-s|). Vector form of
/// toeplitz_embed for rank-one factor extraction.
Matrix temporal_factor_from_collapsed(const Vector& offsets, int T);

/// True when every diagonal of m is constant to within tol (relative).
bool is_toeplitz(const Matrix& m, double tol = 1e-12);

/// True when block (s,t) depends only on t-s, to within tol of the largest entry.
bool is_block_toeplitz(const Matrix& m, SpaceTimeDims dims, double tol = 1e-10);

}  // namespace kroncov
