#include "kroncov/reference.hpp"

#include <cmath>
#include <numbers>

namespace kroncov::reference {

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix rearrange(const Matrix& m, SpaceTimeDims dims) {
  const int p = dims.p, T = dims.T;
  Matrix out(T * T, p * p);
  for (int s = 0; s < T; ++s) {
    for (int t = 0; t < T; ++t) {
      for (int a = 0; a < p; ++a) {
        for (int b = 0; b < p; ++b) {
          out(s + T * t, a + p * b) = m(s * p + a, t * p + b);
        }
      }
    }
  }
  return out;
}

Matrix derearrange(const Matrix& rm, SpaceTimeDims dims) {
  const int p = dims.p, T = dims.T;
  Matrix out(p * T, p * T);
  for (int s = 0; s < T; ++s) {
    for (int t = 0; t < T; ++t) {
      for (int a = 0; a < p; ++a) {
        for (int b = 0; b < p; ++b) {
          out(s * p + a, t * p + b) = rm(s + T * t, a + p * b);
        }
      }
    }
  }
  return out;
}

Matrix toeplitz_collapse(const Matrix& a, SpaceTimeDims dims) {
  const int p = dims.p, T = dims.T;
  Matrix out = Matrix::Zero(2 * T - 1, p * p);
  for (int j = -(T - 1); j <= T - 1; ++j) {
    for (int s = 0; s < T; ++s) {
      const int t = s + j;
      if (t < 0 || t >= T) continue;
      out.row(j + T - 1) += a.row(s + T * t);
    }
    out.row(j + T - 1) /= std::sqrt(static_cast<double>(T - std::abs(j)));
  }
  return out;
}

Matrix toeplitz_embed(const Matrix& at, SpaceTimeDims dims) {
  const int p = dims.p, T = dims.T;
  Matrix out(T * T, p * p);
  for (int s = 0; s < T; ++s) {
    for (int t = 0; t < T; ++t) {
      const int j = t - s;
      out.row(s + T * t) =
          at.row(j + T - 1) / std::sqrt(static_cast<double>(T - std::abs(j)));
    }
  }
  return out;
}

Matrix kron_compose(const std::vector<KronFactor>& factors, const Vector& diag_u,
                    SpaceTimeDims dims) {
  const int n = dims.window();
  Matrix out = Matrix::Zero(n, n);
  for (const auto& f : factors) {
    out += kron(f.temporal, f.spatial);
  }
  for (int t = 0; t < dims.T; ++t) {
    for (int a = 0; a < dims.p; ++a) {
      out(t * dims.p + a, t * dims.p + a) += diag_u(a);
    }
  }
  return out;
}

std::pair<Vector, Matrix> sample_mean_cov(const Matrix& samples) {
  const Eigen::Index n = samples.rows();
  const Eigen::Index d = samples.cols();
  Vector mean = Vector::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) mean(j) += samples(i, j);
  }
  mean /= static_cast<double>(n);
  Matrix cov = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index r = 0; r < d; ++r) {
      const double yr = samples(i, r) - mean(r);
      for (Eigen::Index c = 0; c < d; ++c) {
        cov(r, c) += yr * (samples(i, c) - mean(c));
      }
    }
  }
  cov /= static_cast<double>(n);
  return {std::move(mean), std::move(cov)};
}

Matrix invert(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix work = a;
  Matrix inv = Matrix::Identity(n, n);
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      if (std::abs(work(r, col)) > std::abs(work(pivot, col))) pivot = r;
    }
    if (work(pivot, col) == 0.0) {
      throw NumericError("reference::invert: singular matrix");
    }
    work.row(col).swap(work.row(pivot));
    inv.row(col).swap(inv.row(pivot));
    const double d = work(col, col);
    work.row(col) /= d;
    inv.row(col) /= d;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = work(r, col);
      if (f != 0.0) {
        work.row(r) -= f * work.row(col);
        inv.row(r) -= f * inv.row(col);
      }
    }
  }
  return inv;
}

double log_det_spd(const Matrix& a) {
  const Eigen::Index n = a.rows();
  Matrix lu = a;
  int swaps = 0;
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index pivot = col;
    for (Eigen::Index r = col + 1; r < n; ++r) {
      if (std::abs(lu(r, col)) > std::abs(lu(pivot, col))) pivot = r;
    }
    if (lu(pivot, col) == 0.0) throw NumericError("reference::log_det_spd: singular");
    if (pivot != col) {
      lu.row(col).swap(lu.row(pivot));
      ++swaps;
    }
    for (Eigen::Index r = col + 1; r < n; ++r) {
      const double f = lu(r, col) / lu(col, col);
      lu.row(r).tail(n - col) -= f * lu.row(col).tail(n - col);
    }
  }
  double logdet = 0.0;
  double sign = (swaps % 2 == 0) ? 1.0 : -1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    sign *= (lu(i, i) < 0.0) ? -1.0 : 1.0;
    logdet += std::log(std::abs(lu(i, i)));
  }
  if (sign <= 0.0) throw NumericError("reference::log_det_spd: non-positive determinant");
  return logdet;
}

double gaussian_loglik_dense(const Vector& x, const Vector& mu, const Matrix& sigma) {
  const Vector d = x - mu;
  const Matrix inv = invert(sigma);
  const double quad = d.dot(inv * d);
  const double logdet = log_det_spd(sigma);
  const double dim = static_cast<double>(x.size());
  return -0.5 * quad - 0.5 * logdet - 0.5 * dim * std::log(2.0 * std::numbers::pi);
}

}  // namespace kroncov::reference
