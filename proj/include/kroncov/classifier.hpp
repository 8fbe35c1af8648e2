#pragma once

#include <array>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "kroncov/estimator.hpp"
#include "kroncov/types.hpp"

namespace kroncov {

/// Axis-aligned sub-box of the spatial grid plus its flat feature indices
/// (row-major flattening, last axis fastest).
struct Block {
  int level = 0;
  std::vector<int> lo;       // inclusive, per axis
  std::vector<int> hi;       // exclusive, per axis
  std::vector<int> indices;  // sorted flat indices into [0, p)
};

/// Dyadic hierarchy: level 0 is the full grid; each level splits every block
/// in half along its longest axis (ties toward the first axis).
struct BlockTree {
  SpatialGrid grid;
  int levels = 1;
  std::vector<Block> blocks;  // level-major order, 2^levels - 1 total
};

BlockTree build_block_tree(const SpatialGrid& grid, int levels);

/// Two-class per-block model collection.
struct ClassModelSet {
  SpaceTimeDims dims;  // full p and T
  BlockTree tree;
  std::array<std::vector<KronCovModel>, 2> models;  // [class][block]
};

struct LlrClassifier {
  ClassModelSet models;
  Vector weights;  // per block, all >= 0
  double intercept = 0.0;
  int stride = 0;  // window stride; fit-time default is T (non-overlapping)
};

/// Non-overlapping (or strided) T-frame windows of one track, frame-major
/// rows; the trailing remainder shorter than T is dropped.
SampleSet multiframe_windows(const FeatureTrack& track, int T, int stride);

/// Restriction of full-frame windows to one block's features.
SampleSet restrict_to_block(const SampleSet& windows, const Block& block, int full_p);

double gaussian_loglik(const Vector& x, const KronCovModel& model);

/// Cached Cholesky scorer for repeated density evaluations of one model.
class GaussianScorer {
 public:
  explicit GaussianScorer(const KronCovModel& model);
  double loglik(const Vector& x) const;
  int dim() const { return static_cast<int>(mean_.size()); }

 private:
  Vector mean_;
  Matrix chol_lower_;
  double log_det_ = 0.0;
};

/// Prebuilt scorers for every (class, block) pair of a model set.
class BlockScorers {
 public:
  explicit BlockScorers(const ClassModelSet& set);
  /// Per-block summed window LLRs (class 1 vs class 0) for one track.
  Vector track_llr(const FeatureTrack& track, int T, int stride) const;
  int block_count() const { return static_cast<int>(scorers_[0].size()); }

 private:
  const ClassModelSet* set_;
  std::array<std::vector<GaussianScorer>, 2> scorers_;
};

Vector track_llr_vector(const FeatureTrack& track, const ClassModelSet& models, int T,
                        int stride = 0);

struct LogisticFit {
  Vector weights;
  double intercept = 0.0;
  bool fallback_uniform = false;
  int refit_rounds = 0;
};

/// L2-regularized logistic regression with the clamp-and-refit nonnegativity
/// loop; labels in {0, 1}, one feature row per track.
LogisticFit fit_nonneg_logistic(const Matrix& features, const std::vector<int>& labels,
                                double lambda);

std::pair<int, double> classify_track(const FeatureTrack& track,
                                      const LlrClassifier& classifier);

/// Single full-block quadratic rule: unit weight, zero intercept.
std::pair<int, double> classify_overall(const FeatureTrack& track,
                                        const ClassModelSet& models);

struct TrainOptions {
  int T = 4;
  int levels = 4;
  FitConfig fit;
  std::optional<double> rho_override;  // else Ledoit-Wolf per class and block
  int stride = 0;                      // 0 means stride = T
  bool overall_only = false;           // single block, unit weight
};

LlrClassifier train_llr_classifier(const std::vector<FeatureTrack>& tracks,
                                   const TrainOptions& opts);

struct TrackScore {
  std::string track_id;
  std::optional<int> true_label;
  int predicted_label = 0;
  double score = 0.0;
  Vector block_llrs;
};

/// Score many tracks; skipped holds ids of tracks shorter than one window.
std::vector<TrackScore> classify_tracks(const std::vector<FeatureTrack>& tracks,
                                        const LlrClassifier& classifier,
                                        std::vector<std::string>* skipped = nullptr);

}  // namespace kroncov
