#include "kroncov/estimator.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "kroncov/shrinkage.hpp"

namespace kroncov {

namespace {

// Chunked accumulation: partials are reduced in fixed chunk order, so results
// do not depend on the number of worker threads.
constexpr int kChunk = 256;

int count_rank(const Vector& sv) {
  if (sv.size() == 0) return 0;
  const double cutoff = kRankTol * sv(0);
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) ++r;
  }
  return r;
}

double masked_objective(const Matrix& b, const Matrix& mask, const Matrix& r,
                        double beta, const Vector& sv) {
  const double fid = (mask.array() * (b - r).array()).matrix().squaredNorm();
  return fid + beta * sv.sum();
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Unpenalized rank-constrained fixed point: same fill-in iteration as
// soft_impute but with hard truncation at the given rank. Removes the
// soft-threshold magnitude bias once the rank support is decided.
Matrix refine_rank_constrained(const Matrix& b, const Matrix& mask, int rank,
                               const Matrix& init, const FitConfig& cfg) {
  if (rank <= 0) return Matrix::Zero(b.rows(), b.cols());
  const Matrix observed = mask.array() * b.array();
  const Matrix ones_minus = Matrix::Ones(mask.rows(), mask.cols()) - mask;
  Matrix current = init;
  for (int it = 0; it < cfg.max_iter; ++it) {
    const Matrix filled = observed + (ones_minus.array() * current.array()).matrix();
    Eigen::JacobiSVD<Matrix> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector sv = svd.singularValues();
    for (Eigen::Index i = rank; i < sv.size(); ++i) sv(i) = 0.0;
    Matrix next = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
    if (!next.allFinite()) throw NumericError("rank refinement: NaN in iterate");
    const double rel_change = (next - current).norm() / std::max(current.norm(), 1e-300);
    current = std::move(next);
    if (rel_change < cfg.tol) break;
  }
  return current;
}

}  // namespace

void FitConfig::validate() const {
  if (beta.has_value() == target_rank.has_value()) {
    throw std::invalid_argument("FitConfig: exactly one of beta / target_rank must be set");
  }
  if (beta && *beta < 0.0) throw std::invalid_argument("FitConfig: beta must be >= 0");
  if (target_rank && *target_rank < 1) {
    throw std::invalid_argument("FitConfig: target_rank must be >= 1");
  }
  if (tol <= 0.0) throw std::invalid_argument("FitConfig: tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("FitConfig: max_iter must be >= 1");
}

Matrix KronCovModel::compose_kron() const {
  return symmetrize(kron_compose(factors, diag_u, dims));
}

Matrix KronCovModel::covariance() const {
  Matrix sigma = compose_kron();
  if (rho > 0.0) {
    sigma = shrink_covariance(sigma, rho).sigma;
  }
  if (eig_floor_applied) {
    sigma = psd_floor(sigma, kDefaultEpsRel);
  }
  return sigma;
}

std::pair<Vector, Matrix> sample_mean_cov(const SampleSet& data) {
  data.validate();
  const int n = data.n();
  const int d = data.dims.window();
  if (n < 2) throw DataError("sample_mean_cov: need at least 2 samples");
  if (!data.samples.allFinite()) throw DataError("sample_mean_cov: non-finite sample entries");

  const Vector mean = data.samples.colwise().mean();
  const int chunks = (n + kChunk - 1) / kChunk;
  std::vector<Matrix> partial(chunks);
#pragma omp parallel for num_threads(effective_threads()) schedule(static) if (chunks > 1)
  for (int c = 0; c < chunks; ++c) {
    const int lo = c * kChunk;
    const int len = std::min(kChunk, n - lo);
    Matrix centered = data.samples.middleRows(lo, len);
    centered.rowwise() -= mean.transpose();
    partial[c].noalias() = centered.transpose() * centered;
  }
  Matrix scm = Matrix::Zero(d, d);
  for (const Matrix& g : partial) scm += g;
  scm /= static_cast<double>(n);
  return {mean, symmetrize(scm)};
}

Matrix svt(const Matrix& z, double tau) {
  if (!z.allFinite()) throw NumericError("svt: non-finite input");
  if (tau < 0.0) throw std::invalid_argument("svt: tau must be >= 0");
  Eigen::JacobiSVD<Matrix> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i) sv(i) = std::max(sv(i) - tau, 0.0);
  return svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
}

SoftImputeResult soft_impute(const ToeplitzCollapsed& b, const DiagMask& mask,
                             const FitConfig& cfg) {
  return soft_impute(b, mask, cfg, Matrix::Zero(b.data.rows(), b.data.cols()));
}

SoftImputeResult soft_impute(const ToeplitzCollapsed& b, const DiagMask& mask,
                             const FitConfig& cfg, const Matrix& init) {
  b.validate();
  if (mask.dims != b.dims) throw std::invalid_argument("soft_impute: mask dims mismatch");
  if (mask.collapsed_mask.rows() != b.data.rows() ||
      mask.collapsed_mask.cols() != b.data.cols()) {
    throw std::invalid_argument("soft_impute: mask shape mismatch");
  }
  if (init.rows() != b.data.rows() || init.cols() != b.data.cols()) {
    throw std::invalid_argument("soft_impute: init shape mismatch");
  }
  const double beta = cfg.beta.value_or(0.0);
  if (beta < 0.0) throw std::invalid_argument("soft_impute: beta must be >= 0");
  if (!b.data.allFinite() || !init.allFinite()) {
    throw NumericError("soft_impute: non-finite input");
  }

  const Matrix& m = mask.collapsed_mask;
  const Matrix observed = m.array() * b.data.array();
  const Matrix ones_minus = Matrix::Ones(m.rows(), m.cols()) - m;

  SoftImputeResult res;
  Matrix current = init;
  {
    Eigen::JacobiSVD<Matrix> svd0(current);
    res.objective_trace.push_back(
        masked_objective(b.data, m, current, beta, svd0.singularValues()));
  }
  Vector sv;
  for (int it = 0; it < cfg.max_iter; ++it) {
    const Matrix filled = observed + (ones_minus.array() * current.array()).matrix();
    Eigen::JacobiSVD<Matrix> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    sv = svd.singularValues();
    for (Eigen::Index i = 0; i < sv.size(); ++i) sv(i) = std::max(sv(i) - beta / 2.0, 0.0);
    Matrix next = svd.matrixU() * sv.asDiagonal() * svd.matrixV().transpose();
    if (!next.allFinite()) throw NumericError("soft_impute: NaN in iterate");

    res.objective_trace.push_back(masked_objective(b.data, m, next, beta, sv));
    const double denom = std::max(current.norm(), 1e-300);
    const double rel_change = (next - current).norm() / denom;
    current = std::move(next);
    if (rel_change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.solution = ToeplitzCollapsed{b.dims, std::move(current)};
  res.singular_values = sv;
  res.rank = count_rank(sv);
  return res;
}

BetaSearchResult select_beta_for_rank(const ToeplitzCollapsed& b, const DiagMask& mask,
                                      int r_target, const FitConfig& cfg) {
  b.validate();
  const int max_rank = static_cast<int>(std::min(b.data.rows(), b.data.cols()));
  if (r_target < 1 || r_target > max_rank) {
    throw std::invalid_argument("select_beta_for_rank: target rank outside [1, min(2T-1, p^2)]");
  }
  const Matrix observed = mask.collapsed_mask.array() * b.data.array();
  const double sigma_max = Eigen::JacobiSVD<Matrix>(observed).singularValues()(0);

  FitConfig probe = cfg;
  probe.target_rank.reset();

  auto solve_at = [&](double beta, const Matrix& init) {
    probe.beta = beta;
    return soft_impute(b, mask, probe, init);
  };

  double lo = 0.0;
  double hi = 2.0 * sigma_max;
  SoftImputeResult at_lo = solve_at(lo, Matrix::Zero(b.data.rows(), b.data.cols()));

  BetaSearchResult best;
  best.beta = lo;
  best.solve = at_lo;
  best.achieved_rank = at_lo.rank;
  bool have_exact = (at_lo.rank == r_target);

  if (at_lo.rank < r_target) {
    best.rank_warning = true;  // unattainable even unpenalized
    return best;
  }
  if (sigma_max == 0.0) {
    best.rank_warning = (at_lo.rank != r_target);
    return best;
  }

  SoftImputeResult warm = at_lo;
  for (int step = 0; step < 40; ++step) {
    const double mid = 0.5 * (lo + hi);
    SoftImputeResult at_mid = solve_at(mid, warm.solution.data);
    warm = at_mid;
    if (at_mid.rank >= r_target) {
      lo = mid;
      const bool exact = (at_mid.rank == r_target);
      // prefer exact-rank hits; among equals prefer larger beta
      if (exact && (!have_exact || mid > best.beta)) {
        best.beta = mid;
        best.solve = at_mid;
        best.achieved_rank = at_mid.rank;
        have_exact = true;
      } else if (!have_exact && mid > best.beta) {
        best.beta = mid;
        best.solve = at_mid;
        best.achieved_rank = at_mid.rank;
      }
    } else {
      hi = mid;
    }
  }
  best.rank_warning = (best.achieved_rank != r_target);
  return best;
}

Vector solve_diag_u(const Matrix& scm, const Matrix& lowrank, SpaceTimeDims dims) {
  dims.validate();
  const Eigen::Index n = dims.window();
  if (scm.rows() != n || scm.cols() != n || lowrank.rows() != n || lowrank.cols() != n) {
    throw std::invalid_argument("solve_diag_u: matrices must be pT x pT");
  }
  Vector u = Vector::Zero(dims.p);
  for (int t = 0; t < dims.T; ++t) {
    for (int i = 0; i < dims.p; ++i) {
      const Eigen::Index idx = static_cast<Eigen::Index>(t) * dims.p + i;
      u(i) += scm(idx, idx) - lowrank(idx, idx);
    }
  }
  return u / static_cast<double>(dims.T);
}

KronCovModel fit_dc_kronpca(const SampleSet& data, const FitConfig& cfg) {
  return fit_dc_kronpca(data, cfg, nullptr);
}

KronCovModel fit_dc_kronpca(const SampleSet& data, const FitConfig& cfg,
                            FitDiagnostics* diag) {
  cfg.validate();
  auto [mean, scm] = sample_mean_cov(data);
  const SpaceTimeDims dims = data.dims;

  const RearrangedMatrix r = rearrange(scm, dims);
  const ToeplitzCollapsed b = toeplitz_collapse(r);
  const DiagMask mask = build_diag_mask(dims);

  SoftImputeResult solve;
  double beta_used = 0.0;
  bool rank_warning = false;
  if (cfg.target_rank) {
    BetaSearchResult search = select_beta_for_rank(b, mask, *cfg.target_rank, cfg);
    solve = std::move(search.solve);
    beta_used = search.beta;
    rank_warning = search.rank_warning;
  } else {
    solve = soft_impute(b, mask, cfg);
    beta_used = *cfg.beta;
  }

  // Fix the rank from the penalized solve, then debias the magnitudes with an
  // unpenalized rank-constrained refinement.
  const Matrix refined = refine_rank_constrained(b.data, mask.collapsed_mask, solve.rank,
                                                 solve.solution.data, cfg);

  // Split each retained singular triple into a Toeplitz temporal factor and a
  // symmetrized spatial factor, sqrt(sigma) on each side.
  Eigen::JacobiSVD<Matrix> svd(refined, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? kRankTol * sv(0) : 0.0;
  std::vector<KronFactor> factors;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) <= cutoff || sv(k) <= 0.0) continue;
    const double scale = std::sqrt(sv(k));
    Matrix temporal = temporal_factor_from_collapsed(scale * svd.matrixU().col(k), dims.T);
    Matrix spatial(dims.p, dims.p);
    const Vector v = scale * svd.matrixV().col(k);
    for (int bcol = 0; bcol < dims.p; ++bcol) {
      for (int arow = 0; arow < dims.p; ++arow) {
        spatial(arow, bcol) = v(arow + dims.p * bcol);
      }
    }
    spatial = 0.5 * (spatial + spatial.transpose()).eval();
    factors.push_back(KronFactor{std::move(temporal), std::move(spatial)});
  }

  KronCovModel model;
  model.dims = dims;
  model.mean = mean;
  model.factors = std::move(factors);
  model.diag_u = Vector::Zero(dims.p);
  const Matrix lowrank = model.compose_kron();
  Vector u = solve_diag_u(scm, lowrank, dims);
  if (cfg.clamp_diag_nonneg) u = u.cwiseMax(0.0);
  model.diag_u = std::move(u);

  if (diag) {
    diag->beta_used = beta_used;
    diag->rank = model.separation_rank();
    diag->converged = solve.converged;
    diag->rank_warning = rank_warning;
    diag->objective_trace = solve.objective_trace;
    diag->singular_values = svd.singularValues();
  }
  return model;
}

Matrix psd_floor(const Matrix& sigma, double eps_rel) {
  if (eps_rel <= 0.0) throw std::invalid_argument("psd_floor: eps_rel must be > 0");
  const Eigen::Index n = sigma.rows();
  if (sigma.cols() != n) throw std::invalid_argument("psd_floor: matrix must be square");
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw std::invalid_argument("psd_floor: input must be symmetric");
  }
  const double tr = sigma.trace();
  const double eps = tr > 0.0 ? eps_rel * tr / static_cast<double>(n) : kAbsFloor;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.info() != Eigen::Success) throw NumericError("psd_floor: eigendecomposition failed");
  if (eig.eigenvalues()(0) >= eps) return sigma;

  Vector vals = eig.eigenvalues().cwiseMax(eps);
  Matrix out = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  return symmetrize(out);
}

void ensure_positive_definite(KronCovModel& model) {
  Matrix sigma = model.covariance();
  const double tr = sigma.trace();
  const double eps =
      tr > 0.0 ? kDefaultEpsRel * tr / static_cast<double>(sigma.rows()) : kAbsFloor;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericError("ensure_positive_definite: eig failed");
  if (eig.eigenvalues()(0) < eps) model.eig_floor_applied = true;
}

}  // namespace kroncov
