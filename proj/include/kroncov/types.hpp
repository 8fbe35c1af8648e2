#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kroncov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Validation failures on user-supplied data (files, dimensions, labels).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failures (NaN in a solve, Cholesky on a non-PD matrix, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Spatial dimension p (features per frame) and temporal window length T.
struct SpaceTimeDims {
  int p = 1;
  int T = 1;

  int window() const { return p * T; }

  void validate() const {
    if (p < 1 || T < 1) {
      throw std::invalid_argument("SpaceTimeDims: p and T must be >= 1");
    }
  }

  bool operator==(const SpaceTimeDims&) const = default;
};

/// Axis extents of the spatial feature arrangement; product equals p.
struct SpatialGrid {
  std::vector<int> extents;

  int size() const {
    int s = 1;
    for (int e : extents) s *= e;
    return extents.empty() ? 0 : s;
  }

  void validate() const {
    if (extents.empty()) {
      throw std::invalid_argument("SpatialGrid: needs at least one axis");
    }
    for (int e : extents) {
      if (e < 1) throw std::invalid_argument("SpatialGrid: extents must be >= 1");
    }
  }

  std::string to_string() const;

  bool operator==(const SpatialGrid&) const = default;
};

/// One subject's per-frame feature vectors. frames is F x p, one row per frame.
struct FeatureTrack {
  std::string id;
  std::optional<int> label;  // 0 or 1 when present
  SpatialGrid grid;
  Matrix frames;

  int frame_count() const { return static_cast<int>(frames.rows()); }
  int p() const { return static_cast<int>(frames.cols()); }
};

/// Multiframe sample collection: one row per pT-length sample
/// (frame-major layout: sample = [frame_0 features, frame_1 features, ...]).
struct SampleSet {
  SpaceTimeDims dims;
  Matrix samples;  // n x (p*T)

  int n() const { return static_cast<int>(samples.rows()); }

  void validate() const {
    dims.validate();
    if (samples.cols() != dims.window()) {
      throw std::invalid_argument("SampleSet: sample length != p*T");
    }
  }
};

/// Worker cap for parallel regions: min(OpenMP max threads, KRONCOV_THREADS).
int effective_threads();

}  // namespace kroncov
