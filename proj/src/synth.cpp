#include "kroncov/synth.hpp"

#include <Eigen/Cholesky>

#include <cmath>

#include "kroncov/rng.hpp"

namespace kroncov {

namespace {

Matrix ar_toeplitz(int T, double decay) {
  Matrix t(T, T);
  for (int s = 0; s < T; ++s) {
    for (int u = 0; u < T; ++u) {
      t(s, u) = std::pow(decay, std::abs(s - u));
    }
  }
  return t;
}

Matrix random_spd(int p, Rng& rng) {
  Matrix g(p, p);
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < p; ++i) g(i, j) = rng.normal();
  }
  Matrix s = (g * g.transpose()) / static_cast<double>(p);
  s.diagonal().array() += 0.25;
  s *= static_cast<double>(p) / s.trace();  // unit average variance
  return s;
}

Matrix lower_cholesky(const Matrix& sigma, const char* what) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericError(std::string("sample_tracks: non-PD ") + what);
  }
  return llt.matrixL();
}

}  // namespace

void ScenarioSpec::validate() const {
  dims.validate();
  grid.validate();
  if (grid.size() != dims.p) throw DataError("ScenarioSpec: grid product != p");
  if (rank < 1) throw DataError("ScenarioSpec: rank must be >= 1");
  if (mean_separation < 0.0 || noise_floor < 0.0) {
    throw DataError("ScenarioSpec: scales must be >= 0");
  }
  for (double d : temporal_decay) {
    if (d < 0.0 || d >= 1.0) throw DataError("ScenarioSpec: decay must be in [0, 1)");
  }
}

std::pair<KronCovModel, KronCovModel> make_ground_truth(const ScenarioSpec& spec) {
  spec.validate();
  const int p = spec.dims.p, T = spec.dims.T;

  // spatial factors and mean direction shared across classes
  Rng shared(derive_seed(spec.seed, 0x5eed));
  std::vector<Matrix> spatial(spec.rank);
  for (int i = 0; i < spec.rank; ++i) {
    spatial[i] = random_spd(p, shared) * std::pow(0.5, i);
  }
  Vector direction(p);
  for (int i = 0; i < p; ++i) direction(i) = shared.normal();
  direction.normalize();

  std::pair<KronCovModel, KronCovModel> out;
  for (int k = 0; k < 2; ++k) {
    KronCovModel& model = (k == 0) ? out.first : out.second;
    model.dims = spec.dims;
    for (int i = 0; i < spec.rank; ++i) {
      const double decay = std::pow(spec.temporal_decay[k], i + 1);
      model.factors.push_back(KronFactor{ar_toeplitz(T, decay), spatial[i]});
    }
    Vector frame_mean = (k == 0) ? Vector::Zero(p).eval()
                                 : (spec.mean_separation * direction).eval();
    model.mean.resize(p * T);
    for (int t = 0; t < T; ++t) model.mean.segment(t * p, p) = frame_mean;

    double floor = std::max(spec.noise_floor, 1e-6);
    for (int attempt = 0; attempt < 60; ++attempt) {
      model.diag_u = Vector::Constant(p, floor);
      Eigen::LLT<Matrix> llt(model.covariance());
      if (llt.info() == Eigen::Success) break;
      floor = std::max(floor * 2.0, 1e-3);  // jitter upward until PD
    }
  }
  return out;
}

std::vector<FeatureTrack> sample_tracks(const KronCovModel& model, int n_tracks,
                                        int frames_per_track, std::uint64_t seed,
                                        const SpatialGrid& grid,
                                        const std::string& id_prefix,
                                        std::optional<int> label) {
  const int p = model.dims.p, T = model.dims.T;
  if (n_tracks < 0) throw std::invalid_argument("sample_tracks: n_tracks must be >= 0");
  if (frames_per_track < T) {
    throw DataError("sample_tracks: frames_per_track must be >= T");
  }
  const Matrix sigma = model.covariance();
  const Matrix window_chol = lower_cholesky(sigma, "window covariance");

  // per-frame mean: average of the window's frame segments (stationary mean)
  Vector frame_mean = Vector::Zero(p);
  for (int t = 0; t < T; ++t) frame_mean += model.mean.segment(t * p, p);
  frame_mean /= static_cast<double>(T);

  // Conditioning of the newest frame on the previous T-1: treat the window
  // positionally, previous frames at 0..T-2 and the new frame at T-1.
  Matrix gain;       // p(T-1) x p
  Matrix cond_chol;  // p x p
  if (T > 1) {
    const int m = p * (T - 1);
    const Matrix prev_cov = sigma.topLeftCorner(m, m);
    const Matrix cross = sigma.topRightCorner(m, p);
    Eigen::LLT<Matrix> llt(prev_cov);
    if (llt.info() != Eigen::Success) {
      throw NumericError("sample_tracks: non-PD extension (previous-frame covariance)");
    }
    gain = llt.solve(cross);
    Matrix cond = sigma.bottomRightCorner(p, p) - cross.transpose() * gain;
    cond_chol = lower_cholesky(0.5 * (cond + cond.transpose()), "extension (conditional)");
  }

  std::vector<FeatureTrack> tracks(n_tracks);
#pragma omp parallel for num_threads(effective_threads()) schedule(dynamic) \
    if (n_tracks > 4)
  for (int i = 0; i < n_tracks; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    Matrix frames(frames_per_track, p);

    Vector z(p * T);
    for (int j = 0; j < p * T; ++j) z(j) = rng.normal();
    const Vector first = window_chol.triangularView<Eigen::Lower>() * z;
    for (int t = 0; t < T; ++t) {
      frames.row(t) = (first.segment(t * p, p) + frame_mean).transpose();
    }

    Vector noise(p);
    for (int f = T; f < frames_per_track; ++f) {
      Vector prev(p * (T - 1));
      for (int t = 0; t < T - 1; ++t) {
        prev.segment(t * p, p) =
            frames.row(f - (T - 1) + t).transpose() - frame_mean;
      }
      for (int j = 0; j < p; ++j) noise(j) = rng.normal();
      const Vector next = gain.transpose() * prev +
                          cond_chol.triangularView<Eigen::Lower>() * noise;
      frames.row(f) = (next + frame_mean).transpose();
    }

    FeatureTrack& track = tracks[i];
    track.id = id_prefix + std::to_string(i);
    track.label = label;
    track.grid = grid;
    track.frames = std::move(frames);
  }
  return tracks;
}

SampleSet sample_multivariate(const Vector& mean, const Matrix& cov, SpaceTimeDims dims,
                              int n, std::uint64_t seed) {
  const int d = static_cast<int>(mean.size());
  if (cov.rows() != d || cov.cols() != d) {
    throw std::invalid_argument("sample_multivariate: shape mismatch");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("sample_multivariate: non-PD covariance");
  const Matrix l = llt.matrixL();
  SampleSet out;
  out.dims = dims;
  out.samples.resize(n, d);
  Rng rng(seed);
  Vector z(d);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(j) = rng.normal();
    out.samples.row(i) = (mean + l * z).transpose();
  }
  return out;
}

}  // namespace kroncov
