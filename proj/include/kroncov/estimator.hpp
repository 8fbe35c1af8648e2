#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "kroncov/kron_algebra.hpp"
#include "kroncov/types.hpp"

namespace kroncov {

/// Solver configuration. Exactly one of beta / target_rank must be set.
struct FitConfig {
  std::optional<double> beta;
  std::optional<int> target_rank;
  double tol = 1e-6;
  int max_iter = 500;
  bool clamp_diag_nonneg = false;

  void validate() const;
};

/// Singular values at or below this fraction of the largest count as zero.
inline constexpr double kRankTol = 1e-10;

/// Relative eigenvalue floor applied when a composed estimate must be PD.
inline constexpr double kDefaultEpsRel = 1e-6;

/// Absolute eigenvalue floor fallback for non-positive trace.
inline constexpr double kAbsFloor = 1e-12;

/// Fitted covariance model: mean, Kronecker factor terms, per-feature diagonal
/// correction, shrinkage weight, and an eigenvalue-floor marker. Immutable in
/// practice; compose on demand.
struct KronCovModel {
  SpaceTimeDims dims;
  Vector mean;                      // length p*T
  std::vector<KronFactor> factors;  // (T_i, S_i), T_i Toeplitz, S_i symmetric
  Vector diag_u;                    // length p
  double rho = 0.0;                 // shrinkage weight in [0, 1]
  bool eig_floor_applied = false;

  int separation_rank() const { return static_cast<int>(factors.size()); }

  /// Pre-shrinkage composition sum_i T_i (x) S_i + I (x) diag(u), symmetrized.
  Matrix compose_kron() const;

  /// Effective covariance: shrinkage toward the scaled identity, then the
  /// eigenvalue floor when flagged.
  Matrix covariance() const;
};

struct SoftImputeResult {
  ToeplitzCollapsed solution;
  int rank = 0;
  std::vector<double> objective_trace;
  bool converged = false;
  Vector singular_values;
};

struct BetaSearchResult {
  double beta = 0.0;
  SoftImputeResult solve;      // solution at the returned beta
  int achieved_rank = 0;
  bool rank_warning = false;   // achieved rank != requested rank
};

struct FitDiagnostics {
  double beta_used = 0.0;
  int rank = 0;
  bool converged = true;
  bool rank_warning = false;
  std::vector<double> objective_trace;
  Vector singular_values;
};

std::pair<Vector, Matrix> sample_mean_cov(const SampleSet& data);

/// Proximal operator of tau * nuclear norm: soft-threshold singular values.
Matrix svt(const Matrix& z, double tau);

SoftImputeResult soft_impute(const ToeplitzCollapsed& b, const DiagMask& mask,
                             const FitConfig& cfg);

/// Warm-started variant; init must share shape with b.
SoftImputeResult soft_impute(const ToeplitzCollapsed& b, const DiagMask& mask,
                             const FitConfig& cfg, const Matrix& init);

/// Bisection on beta in [0, 2*sigma_max(mask o b)] for the requested rank;
/// ties resolved toward larger beta.
BetaSearchResult select_beta_for_rank(const ToeplitzCollapsed& b, const DiagMask& mask,
                                      int r_target, const FitConfig& cfg);

/// Least-squares fit of I (x) diag(u) to the residual diagonal:
/// u_i = mean over frames of (scm - lowrank) diagonal at feature i.
Vector solve_diag_u(const Matrix& scm, const Matrix& lowrank, SpaceTimeDims dims);

/// Full pipeline: sample statistics -> rearrange -> collapse -> penalized
/// low-rank solve -> unpenalized rank-constrained refinement (debiases the
/// soft-thresholded magnitudes) -> factor extraction -> diagonal correction.
KronCovModel fit_dc_kronpca(const SampleSet& data, const FitConfig& cfg);
KronCovModel fit_dc_kronpca(const SampleSet& data, const FitConfig& cfg,
                            FitDiagnostics* diag);

/// Clamp eigenvalues below eps_rel * trace / dim up to that floor (absolute
/// fallback when trace <= 0). Input must be symmetric.
Matrix psd_floor(const Matrix& sigma, double eps_rel);

/// Set eig_floor_applied when the effective covariance needs flooring to be PD.
void ensure_positive_definite(KronCovModel& model);

}  // namespace kroncov
