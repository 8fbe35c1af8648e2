#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "kroncov/estimator.hpp"
#include "kroncov/types.hpp"

namespace kroncov {

/// Two-class ground-truth scenario. Classes share the spatial factors and
/// noise floor; they differ in temporal decay and in a mean offset along one
/// seeded direction. Defaults give a well-separated two-class problem whose
/// discriminating structure is mostly temporal.
struct ScenarioSpec {
  SpaceTimeDims dims{16, 4};
  SpatialGrid grid{{4, 4}};
  int rank = 2;
  double mean_separation = 0.45;
  double temporal_decay[2] = {0.15, 0.75};
  double noise_floor = 0.25;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Ground-truth models for class 0 and class 1. Temporal factors are
/// AR-style Toeplitz (decay^(i+1) per factor i), spatial factors seeded
/// random symmetric PD; both composed covariances verified PD (noise floor
/// jittered upward when needed).
std::pair<KronCovModel, KronCovModel> make_ground_truth(const ScenarioSpec& spec);

/// Stationary Gaussian tracks whose every T-frame window has the model's
/// multiframe covariance: the first window is drawn jointly, later frames by
/// Gaussian conditioning on the previous T-1 frames under the block-Toeplitz
/// extension. Per-track substreams derived from (seed, track index).
std::vector<FeatureTrack> sample_tracks(const KronCovModel& model, int n_tracks,
                                        int frames_per_track, std::uint64_t seed,
                                        const SpatialGrid& grid,
                                        const std::string& id_prefix,
                                        std::optional<int> label);

/// n direct draws from N(mean, cov) as a SampleSet (Cholesky sampling).
SampleSet sample_multivariate(const Vector& mean, const Matrix& cov, SpaceTimeDims dims,
                              int n, std::uint64_t seed);

}  // namespace kroncov
