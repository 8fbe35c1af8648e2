#include "kroncov/classifier.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kroncov/shrinkage.hpp"

namespace kroncov {

namespace {

std::vector<int> box_indices(const SpatialGrid& grid, const std::vector<int>& lo,
                             const std::vector<int>& hi) {
  // row-major flattening, last axis fastest; lexicographic walk keeps the
  // indices sorted
  std::vector<int> out;
  std::vector<int> cursor = lo;
  const int axes = static_cast<int>(grid.extents.size());
  while (true) {
    int flat = 0;
    for (int a = 0; a < axes; ++a) flat = flat * grid.extents[a] + cursor[a];
    out.push_back(flat);
    int a = axes - 1;
    while (a >= 0) {
      if (++cursor[a] < hi[a]) break;
      cursor[a] = lo[a];
      --a;
    }
    if (a < 0) break;
  }
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double logistic_objective(const Matrix& x, const std::vector<int>& labels,
                          const Vector& theta, double lambda) {
  const Eigen::Index k = x.cols();
  double obj = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double eta = x.row(i).dot(theta.head(k)) + theta(k);
    const double margin = (labels[i] == 1 ? eta : -eta);
    obj += softplus(-margin);
  }
  obj += 0.5 * lambda * theta.head(k).squaredNorm();
  return obj;
}

// Damped Newton on the L2-penalized logistic loss; intercept unpenalized.
std::pair<Vector, double> l2_logistic(const Matrix& x, const std::vector<int>& labels,
                                      double lambda) {
  const Eigen::Index n = x.rows();
  const Eigen::Index k = x.cols();
  Vector theta = Vector::Zero(k + 1);
  for (int iter = 0; iter < 500; ++iter) {
    Vector grad = Vector::Zero(k + 1);
    Matrix hess = Matrix::Zero(k + 1, k + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eta = x.row(i).dot(theta.head(k)) + theta(k);
      const double p = sigmoid(eta);
      const double resid = p - static_cast<double>(labels[i]);
      const double w = std::max(p * (1.0 - p), 1e-12);
      Vector xi(k + 1);
      xi.head(k) = x.row(i).transpose();
      xi(k) = 1.0;
      grad += resid * xi;
      hess.selfadjointView<Eigen::Lower>().rankUpdate(xi, w);
    }
    hess = Matrix(hess.selfadjointView<Eigen::Lower>());
    grad.head(k) += lambda * theta.head(k);
    hess.topLeftCorner(k, k).diagonal().array() += lambda;
    if (grad.norm() <= 1e-8) break;

    Vector step = hess.ldlt().solve(grad);
    if (!step.allFinite()) throw NumericError("logistic fit: Newton step failed");
    const double obj0 = logistic_objective(x, labels, theta, lambda);
    const double slope = grad.dot(step);
    double t = 1.0;
    Vector trial = theta - step;
    for (int bt = 0; bt < 60; ++bt) {
      if (logistic_objective(x, labels, trial, lambda) <= obj0 - 1e-4 * t * slope) break;
      t *= 0.5;
      trial = theta - t * step;
    }
    theta = trial;
  }
  return {theta.head(k), theta(k)};
}

}  // namespace

BlockTree build_block_tree(const SpatialGrid& grid, int levels) {
  grid.validate();
  if (levels < 1) throw std::invalid_argument("build_block_tree: levels must be >= 1");
  const int axes = static_cast<int>(grid.extents.size());

  BlockTree tree;
  tree.grid = grid;
  tree.levels = levels;

  Block root;
  root.level = 0;
  root.lo.assign(axes, 0);
  root.hi = grid.extents;
  root.indices = box_indices(grid, root.lo, root.hi);
  tree.blocks.push_back(std::move(root));

  std::size_t level_begin = 0;
  for (int level = 1; level < levels; ++level) {
    const std::size_t level_end = tree.blocks.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      const Block parent = tree.blocks[i];  // copy: push_back invalidates refs
      int axis = 0;
      for (int a = 1; a < axes; ++a) {
        if (parent.hi[a] - parent.lo[a] > parent.hi[axis] - parent.lo[axis]) axis = a;
      }
      const int extent = parent.hi[axis] - parent.lo[axis];
      if (extent < 2) {
        throw DataError("build_block_tree: level " + std::to_string(level) +
                        " would split a single-cell axis; reduce levels");
      }
      const int mid = parent.lo[axis] + (extent + 1) / 2;
      Block first = parent, second = parent;
      first.level = second.level = level;
      first.hi[axis] = mid;
      second.lo[axis] = mid;
      first.indices = box_indices(grid, first.lo, first.hi);
      second.indices = box_indices(grid, second.lo, second.hi);
      tree.blocks.push_back(std::move(first));
      tree.blocks.push_back(std::move(second));
    }
    level_begin = level_end;
  }
  return tree;
}

SampleSet multiframe_windows(const FeatureTrack& track, int T, int stride) {
  if (T < 1) throw std::invalid_argument("multiframe_windows: T must be >= 1");
  if (stride <= 0) stride = T;
  const int frames = track.frame_count();
  const int p = track.p();
  if (frames < T) {
    throw DataError("track '" + track.id + "' has " + std::to_string(frames) +
                    " frames, shorter than window length T=" + std::to_string(T));
  }
  const int count = (frames - T) / stride + 1;
  SampleSet out;
  out.dims = SpaceTimeDims{p, T};
  out.samples.resize(count, p * T);
  for (int w = 0; w < count; ++w) {
    for (int t = 0; t < T; ++t) {
      out.samples.row(w).segment(t * p, p) = track.frames.row(w * stride + t);
    }
  }
  return out;
}

SampleSet restrict_to_block(const SampleSet& windows, const Block& block, int full_p) {
  const int T = windows.dims.T;
  const int bp = static_cast<int>(block.indices.size());
  SampleSet out;
  out.dims = SpaceTimeDims{bp, T};
  out.samples.resize(windows.n(), bp * T);
  for (int t = 0; t < T; ++t) {
    for (int i = 0; i < bp; ++i) {
      out.samples.col(t * bp + i) = windows.samples.col(t * full_p + block.indices[i]);
    }
  }
  return out;
}

GaussianScorer::GaussianScorer(const KronCovModel& model) : mean_(model.mean) {
  const Matrix sigma = model.covariance();
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericError("GaussianScorer: covariance is not positive definite");
  }
  chol_lower_ = llt.matrixL();
  log_det_ = 2.0 * chol_lower_.diagonal().array().log().sum();
}

double GaussianScorer::loglik(const Vector& x) const {
  if (x.size() != mean_.size()) {
    throw std::invalid_argument("GaussianScorer: sample length mismatch");
  }
  const Vector z = chol_lower_.triangularView<Eigen::Lower>().solve(x - mean_);
  return -0.5 * z.squaredNorm() - 0.5 * log_det_ -
         0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi);
}

double gaussian_loglik(const Vector& x, const KronCovModel& model) {
  return GaussianScorer(model).loglik(x);
}

BlockScorers::BlockScorers(const ClassModelSet& set) : set_(&set) {
  for (int k = 0; k < 2; ++k) {
    scorers_[k].reserve(set.models[k].size());
    for (const KronCovModel& m : set.models[k]) scorers_[k].emplace_back(m);
  }
  if (scorers_[0].size() != scorers_[1].size() ||
      scorers_[0].size() != set.tree.blocks.size()) {
    throw std::invalid_argument("BlockScorers: model count does not match block count");
  }
}

Vector BlockScorers::track_llr(const FeatureTrack& track, int T, int stride) const {
  const SampleSet windows = multiframe_windows(track, T, stride);
  const int full_p = set_->dims.p;
  if (track.p() != full_p) {
    throw DataError("track '" + track.id + "' has p=" + std::to_string(track.p()) +
                    ", model expects p=" + std::to_string(full_p));
  }
  const int blocks = block_count();
  Vector llr = Vector::Zero(blocks);
  for (int j = 0; j < blocks; ++j) {
    const SampleSet sub = restrict_to_block(windows, set_->tree.blocks[j], full_p);
    double acc = 0.0;
    for (int w = 0; w < sub.n(); ++w) {
      const Vector x = sub.samples.row(w).transpose();
      acc += scorers_[1][j].loglik(x) - scorers_[0][j].loglik(x);
    }
    llr(j) = acc;
  }
  return llr;
}

Vector track_llr_vector(const FeatureTrack& track, const ClassModelSet& models, int T,
                        int stride) {
  return BlockScorers(models).track_llr(track, T, stride);
}

LogisticFit fit_nonneg_logistic(const Matrix& features, const std::vector<int>& labels,
                                double lambda) {
  const Eigen::Index n = features.rows();
  const Eigen::Index blocks = features.cols();
  if (n != static_cast<Eigen::Index>(labels.size())) {
    throw std::invalid_argument("fit_nonneg_logistic: label count mismatch");
  }
  int per_class[2] = {0, 0};
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("fit_nonneg_logistic: labels must be 0 or 1");
    ++per_class[y];
  }
  if (per_class[0] < 2 || per_class[1] < 2) {
    throw DataError("fit_nonneg_logistic: need at least 2 tracks per class");
  }
  if (!features.allFinite()) throw NumericError("fit_nonneg_logistic: non-finite features");

  std::vector<int> active(blocks);
  for (Eigen::Index j = 0; j < blocks; ++j) active[j] = static_cast<int>(j);

  LogisticFit fit;
  fit.weights = Vector::Zero(blocks);
  while (!active.empty()) {
    ++fit.refit_rounds;
    Matrix sub(n, active.size());
    for (std::size_t j = 0; j < active.size(); ++j) sub.col(j) = features.col(active[j]);
    auto [w, b] = l2_logistic(sub, labels, lambda);

    std::vector<int> survivors;
    for (std::size_t j = 0; j < active.size(); ++j) {
      if (w(j) >= 0.0) survivors.push_back(active[j]);
    }
    if (survivors.size() == active.size()) {
      fit.weights.setZero();
      for (std::size_t j = 0; j < active.size(); ++j) fit.weights(active[j]) = w(j);
      fit.intercept = b;
      return fit;
    }
    active = std::move(survivors);
  }

  // every block clamped away: uniform weights, intercept refit alone (1-D Newton)
  fit.fallback_uniform = true;
  fit.weights = Vector::Constant(blocks, 1.0 / static_cast<double>(blocks));
  const Vector combined = features * fit.weights;
  double b = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    double g = 0.0, h = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(combined(i) + b);
      g += p - labels[i];
      h += std::max(p * (1.0 - p), 1e-12);
    }
    if (std::abs(g) <= 1e-10) break;
    b -= g / h;
  }
  fit.intercept = b;
  return fit;
}

std::pair<int, double> classify_track(const FeatureTrack& track,
                                      const LlrClassifier& classifier) {
  const BlockScorers scorers(classifier.models);
  const int T = classifier.models.dims.T;
  const Vector llr = scorers.track_llr(track, T, classifier.stride);
  const double score = classifier.intercept + classifier.weights.dot(llr);
  return {score > 0.0 ? 1 : 0, score};
}

std::pair<int, double> classify_overall(const FeatureTrack& track,
                                        const ClassModelSet& models) {
  const BlockScorers scorers(models);
  const Vector llr = scorers.track_llr(track, models.dims.T, models.dims.T);
  const double score = llr(0);  // block 0 is the full feature set
  return {score > 0.0 ? 1 : 0, score};
}

LlrClassifier train_llr_classifier(const std::vector<FeatureTrack>& tracks,
                                   const TrainOptions& opts) {
  if (tracks.empty()) throw DataError("train: no training tracks");
  opts.fit.validate();
  const int levels = opts.overall_only ? 1 : opts.levels;
  const int T = opts.T;
  const int stride = opts.stride > 0 ? opts.stride : T;

  const SpatialGrid grid = tracks.front().grid;
  const int p = grid.size();
  std::vector<const FeatureTrack*> usable;
  for (const FeatureTrack& t : tracks) {
    if (!t.label.has_value()) throw DataError("train: track '" + t.id + "' has no label");
    if (*t.label != 0 && *t.label != 1) {
      throw DataError("train: track '" + t.id + "' label must be 0 or 1");
    }
    if (!(t.grid == grid) || t.p() != p) {
      throw DataError("train: track '" + t.id + "' grid/p differs from the first track");
    }
    if (t.frame_count() >= T) usable.push_back(&t);
  }

  BlockTree tree = build_block_tree(grid, levels);
  const int blocks = static_cast<int>(tree.blocks.size());

  // pooled full-width windows per class
  std::array<SampleSet, 2> full;
  for (int k = 0; k < 2; ++k) {
    std::vector<Matrix> parts;
    int rows = 0;
    for (const FeatureTrack* t : usable) {
      if (*t->label != k) continue;
      SampleSet w = multiframe_windows(*t, T, stride);
      rows += w.n();
      parts.push_back(std::move(w.samples));
    }
    full[k].dims = SpaceTimeDims{p, T};
    full[k].samples.resize(rows, p * T);
    int at = 0;
    for (const Matrix& m : parts) {
      full[k].samples.middleRows(at, m.rows()) = m;
      at += static_cast<int>(m.rows());
    }
    if (rows < 2) {
      throw DataError("train: class " + std::to_string(k) + " has " + std::to_string(rows) +
                      " multiframe window(s) for block 0; need >= 2");
    }
  }

  ClassModelSet set;
  set.dims = SpaceTimeDims{p, T};
  set.tree = std::move(tree);
  set.models[0].resize(blocks);
  set.models[1].resize(blocks);

  std::vector<std::string> fit_errors(2 * blocks);
#pragma omp parallel for num_threads(effective_threads()) schedule(dynamic) \
    if (blocks > 1)
  for (int task = 0; task < 2 * blocks; ++task) {
    const int k = task / blocks;
    const int j = task % blocks;
    try {
      const SampleSet sub = restrict_to_block(full[k], set.tree.blocks[j], p);
      FitConfig cfg = opts.fit;
      if (cfg.target_rank) {
        // a block can hold at most min(2T-1, p_block^2) Kronecker terms
        const int bp = static_cast<int>(set.tree.blocks[j].indices.size());
        cfg.target_rank = std::min(*cfg.target_rank, std::min(2 * T - 1, bp * bp));
      }
      KronCovModel model = fit_dc_kronpca(sub, cfg);
      const double rho =
          opts.rho_override ? *opts.rho_override : ledoit_wolf_rho(sub);
      model = shrink(model, rho);
      ensure_positive_definite(model);
      set.models[k][j] = std::move(model);
    } catch (const std::exception& e) {
      fit_errors[task] = "class " + std::to_string(k) + " block " + std::to_string(j) +
                         ": " + e.what();
    }
  }
  for (const std::string& err : fit_errors) {
    if (!err.empty()) throw DataError("train: " + err);
  }

  LlrClassifier clf;
  clf.models = std::move(set);
  clf.stride = stride;
  if (opts.overall_only) {
    clf.weights = Vector::Ones(1);
    clf.intercept = 0.0;
    return clf;
  }

  const BlockScorers scorers(clf.models);
  const int n = static_cast<int>(usable.size());
  Matrix features(n, blocks);
  std::vector<int> labels(n);
#pragma omp parallel for num_threads(effective_threads()) schedule(dynamic) if (n > 8)
  for (int i = 0; i < n; ++i) {
    features.row(i) = scorers.track_llr(*usable[i], T, stride).transpose();
    labels[i] = *usable[i]->label;
  }
  const double lambda = 1.0 / static_cast<double>(n);
  const LogisticFit lf = fit_nonneg_logistic(features, labels, lambda);
  clf.weights = lf.weights;
  clf.intercept = lf.intercept;
  return clf;
}

std::vector<TrackScore> classify_tracks(const std::vector<FeatureTrack>& tracks,
                                        const LlrClassifier& classifier,
                                        std::vector<std::string>* skipped) {
  const BlockScorers scorers(classifier.models);
  const int T = classifier.models.dims.T;
  const int n = static_cast<int>(tracks.size());
  std::vector<std::optional<TrackScore>> slots(n);
#pragma omp parallel for num_threads(effective_threads()) schedule(dynamic) if (n > 8)
  for (int i = 0; i < n; ++i) {
    if (tracks[i].frame_count() < T) continue;
    const Vector llr = scorers.track_llr(tracks[i], T, classifier.stride);
    TrackScore ts;
    ts.track_id = tracks[i].id;
    ts.true_label = tracks[i].label;
    ts.score = classifier.intercept + classifier.weights.dot(llr);
    ts.predicted_label = ts.score > 0.0 ? 1 : 0;
    ts.block_llrs = llr;
    slots[i] = std::move(ts);
  }
  std::vector<TrackScore> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (slots[i]) {
      out.push_back(std::move(*slots[i]));
    } else if (skipped) {
      skipped->push_back(tracks[i].id);
    }
  }
  return out;
}

}  // namespace kroncov
