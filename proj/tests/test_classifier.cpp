#include "kroncov/classifier.hpp"

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "kroncov/harness.hpp"
#include "kroncov/reference.hpp"
#include "kroncov/rng.hpp"
#include "kroncov/synth.hpp"
#include "test_util.hpp"

using namespace kroncov;
using testutil::random_matrix;
using testutil::random_spd;

namespace {

Matrix ar_toeplitz(int T, double decay) {
  Matrix t(T, T);
  for (int s = 0; s < T; ++s) {
    for (int c = 0; c < T; ++c) t(s, c) = std::pow(decay, std::abs(s - c));
  }
  return t;
}

KronCovModel identity_model(int p, int T, double scale = 1.0) {
  KronCovModel m;
  m.dims = {p, T};
  m.mean = Vector::Zero(p * T);
  m.diag_u = Vector::Constant(p, scale);
  return m;
}

// spatial factor of a sub-block placed into the full p x p frame
Matrix embed_block(const Matrix& s, const std::vector<int>& indices, int p) {
  Matrix out = Matrix::Zero(p, p);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (std::size_t j = 0; j < indices.size(); ++j) {
      out(indices[i], indices[j]) = s(i, j);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("block tree construction") {
  SUBCASE("one level keeps the full grid") {
    const BlockTree tree = build_block_tree(SpatialGrid{{4, 4}}, 1);
    REQUIRE(tree.blocks.size() == 1);
    CHECK(tree.blocks[0].indices.size() == 16);
  }
  SUBCASE("two levels split along the first axis on ties") {
    const BlockTree tree = build_block_tree(SpatialGrid{{4, 4}}, 2);
    REQUIRE(tree.blocks.size() == 3);
    const Block& first = tree.blocks[1];
    const Block& second = tree.blocks[2];
    CHECK(first.hi[0] - first.lo[0] == 2);   // rows halved
    CHECK(first.hi[1] - first.lo[1] == 4);   // columns intact
    CHECK(second.lo[0] == 2);
    CHECK(first.indices.size() == 8);
    CHECK(second.indices.size() == 8);
    // partition of the full index set
    std::vector<int> merged = first.indices;
    merged.insert(merged.end(), second.indices.begin(), second.indices.end());
    std::sort(merged.begin(), merged.end());
    for (int i = 0; i < 16; ++i) CHECK(merged[i] == i);
  }
  SUBCASE("four levels on an 8x8 grid give 15 blocks") {
    const BlockTree tree = build_block_tree(SpatialGrid{{8, 8}}, 4);
    CHECK(tree.blocks.size() == 15);
    for (const Block& b : tree.blocks) CHECK_FALSE(b.indices.empty());
  }
  SUBCASE("levels beyond single cells rejected") {
    CHECK_THROWS_AS(build_block_tree(SpatialGrid{{2}}, 3), DataError);
  }
}

TEST_CASE("multiframe windows tile a track frame-major") {
  FeatureTrack track;
  track.id = "t";
  track.grid = SpatialGrid{{2}};
  track.frames.resize(5, 2);
  for (int f = 0; f < 5; ++f) {
    track.frames(f, 0) = 10.0 * f;
    track.frames(f, 1) = 10.0 * f + 1;
  }
  const SampleSet windows = multiframe_windows(track, 2, 2);
  REQUIRE(windows.n() == 2);  // frames 0-1 and 2-3; trailing frame dropped
  Vector expected(4);
  expected << 0, 1, 10, 11;
  CHECK((windows.samples.row(0).transpose() - expected).cwiseAbs().maxCoeff() == 0.0);
  expected << 20, 21, 30, 31;
  CHECK((windows.samples.row(1).transpose() - expected).cwiseAbs().maxCoeff() == 0.0);

  CHECK(multiframe_windows(track, 2, 1).n() == 4);
  CHECK_THROWS_AS(multiframe_windows(track, 6, 6), DataError);
}

TEST_CASE("gaussian_loglik closed-form values") {
  SUBCASE("standard normal at the mode") {
    const KronCovModel m = identity_model(2, 1);
    const double got = gaussian_loglik(Vector::Zero(2), m);
    CHECK(got == doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
  }
  SUBCASE("isotropic variance 4 away from the mean") {
    const KronCovModel m = identity_model(2, 1, 4.0);
    Vector x(2);
    x << 2, 0;
    const double expected = -0.5 - 0.5 * std::log(16.0) - std::log(2.0 * std::numbers::pi);
    CHECK(gaussian_loglik(x, m) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(gaussian_loglik(x, m) == doctest::Approx(-3.7242).epsilon(1e-4));
  }
}

TEST_CASE("gaussian_loglik agrees with the dense-inverse reference") {
  Rng rng(211);
  for (const int dim : {4, 6, 16, 64}) {
    const int p = dim / 2;
    KronCovModel m;
    m.dims = {p, 2};
    m.mean = random_matrix(dim, 1, rng).col(0);
    m.factors.push_back({ar_toeplitz(2, 0.4), random_spd(p, rng)});
    m.diag_u = Vector::Constant(p, 0.7);
    const Vector x = m.mean + random_matrix(dim, 1, rng).col(0);
    const double fast = gaussian_loglik(x, m);
    const double dense = reference::gaussian_loglik_dense(x, m.mean, m.covariance());
    CHECK(fast == doctest::Approx(dense).epsilon(1e-8));
  }
}

TEST_CASE("gaussian_loglik rejects a non-PD model") {
  KronCovModel m = identity_model(2, 1);
  m.diag_u(0) = -1.0;  // indefinite
  CHECK_THROWS_AS(gaussian_loglik(Vector::Zero(2), m), NumericError);
}

TEST_CASE("track LLRs: identical models give zeros, antisymmetry is exact") {
  Rng rng(223);
  ScenarioSpec spec;
  spec.dims = {4, 2};
  spec.grid = SpatialGrid{{4}};
  spec.rank = 1;
  const auto truth = make_ground_truth(spec);
  const auto tracks = sample_tracks(truth.first, 3, 6, 5, spec.grid, "trk", 0);

  ClassModelSet same;
  same.dims = spec.dims;
  same.tree = build_block_tree(spec.grid, 2);
  for (int k = 0; k < 2; ++k) {
    for (std::size_t j = 0; j < same.tree.blocks.size(); ++j) {
      KronCovModel m = identity_model(
          static_cast<int>(same.tree.blocks[j].indices.size()), 2);
      same.models[k].push_back(std::move(m));
    }
  }
  for (const FeatureTrack& t : tracks) {
    CHECK(track_llr_vector(t, same, 2).cwiseAbs().maxCoeff() == 0.0);
  }

  // swap classes: LLR flips sign bit-for-bit
  ClassModelSet swapped = same;
  swapped.models[1][0].diag_u *= 2.0;
  ClassModelSet reversed = swapped;
  std::swap(reversed.models[0], reversed.models[1]);
  for (const FeatureTrack& t : tracks) {
    const Vector a = track_llr_vector(t, swapped, 2);
    const Vector b = track_llr_vector(t, reversed, 2);
    CHECK((a + b).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("block-diagonal truth: whole-vector LLR is the sum of leaf LLRs") {
  Rng rng(227);
  const int T = 3;
  const SpatialGrid grid{{4}};
  const BlockTree tree = build_block_tree(grid, 2);
  REQUIRE(tree.blocks.size() == 3);

  ClassModelSet set;
  set.dims = {4, T};
  set.tree = tree;
  for (int k = 0; k < 2; ++k) {
    // leaf blocks get their own temporal/spatial factors per class
    std::vector<KronCovModel> leaves;
    for (int leaf = 0; leaf < 2; ++leaf) {
      KronCovModel m;
      m.dims = {2, T};
      Vector mean(2);
      mean << 0.3 * k + 0.1 * leaf, -0.2 * k;
      m.mean.resize(2 * T);
      for (int t = 0; t < T; ++t) m.mean.segment(t * 2, 2) = mean;
      m.factors.push_back({ar_toeplitz(T, 0.3 + 0.3 * k), random_spd(2, rng)});
      m.diag_u = Vector::Constant(2, 0.5);
      leaves.push_back(std::move(m));
    }
    // full model is the block-diagonal composition of the leaves
    KronCovModel full;
    full.dims = {4, T};
    full.mean.resize(4 * T);
    for (int t = 0; t < T; ++t) {
      full.mean.segment(t * 4, 2) = leaves[0].mean.segment(t * 2, 2);
      full.mean.segment(t * 4 + 2, 2) = leaves[1].mean.segment(t * 2, 2);
    }
    for (int leaf = 0; leaf < 2; ++leaf) {
      full.factors.push_back(
          {leaves[leaf].factors[0].temporal,
           embed_block(leaves[leaf].factors[0].spatial, tree.blocks[1 + leaf].indices, 4)});
    }
    full.diag_u.resize(4);
    full.diag_u << leaves[0].diag_u, leaves[1].diag_u;
    set.models[k] = {std::move(full), std::move(leaves[0]), std::move(leaves[1])};
  }

  ScenarioSpec spec;
  spec.dims = {4, T};
  spec.grid = grid;
  const auto truth = make_ground_truth(spec);
  const auto tracks = sample_tracks(truth.first, 4, 9, 11, grid, "bd", std::nullopt);
  for (const FeatureTrack& t : tracks) {
    const Vector llr = track_llr_vector(t, set, T);
    CHECK(llr(0) == doctest::Approx(llr(1) + llr(2)).epsilon(1e-8));
  }
}

TEST_CASE("fit_nonneg_logistic") {
  Rng rng(229);
  SUBCASE("a separable block earns positive weight and perfect training accuracy") {
    const int n = 24;
    Matrix features(n, 2);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      labels[i] = i % 2;
      features(i, 0) = (labels[i] == 1 ? 3.0 : -3.0) + 0.3 * rng.normal();
      features(i, 1) = rng.normal();
    }
    const LogisticFit fit = fit_nonneg_logistic(features, labels, 1.0 / n);
    CHECK(fit.weights(0) > 0.0);
    CHECK(fit.weights.minCoeff() >= 0.0);
    int correct = 0;
    for (int i = 0; i < n; ++i) {
      const double score = fit.intercept + features.row(i).dot(fit.weights);
      correct += ((score > 0.0 ? 1 : 0) == labels[i]);
    }
    CHECK(correct == n);
  }
  SUBCASE("all-zero features leave only the class-prior intercept") {
    Matrix features = Matrix::Zero(10, 3);
    std::vector<int> labels{1, 1, 1, 1, 1, 1, 0, 0, 0, 0};
    const LogisticFit fit = fit_nonneg_logistic(features, labels, 0.1);
    CHECK(fit.weights.cwiseAbs().maxCoeff() == 0.0);
    CHECK(fit.intercept == doctest::Approx(std::log(6.0 / 4.0)).epsilon(1e-6));
  }
  SUBCASE("an anti-correlated block is clamped to zero") {
    const int n = 30;
    Matrix features(n, 2);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) {
      labels[i] = i % 2;
      features(i, 0) = (labels[i] == 1 ? 2.0 : -2.0) + 0.2 * rng.normal();
      features(i, 1) = (labels[i] == 1 ? -2.0 : 2.0) + 0.2 * rng.normal();
    }
    const LogisticFit fit = fit_nonneg_logistic(features, labels, 1.0 / n);
    CHECK(fit.weights(0) > 0.0);
    CHECK(fit.weights(1) == 0.0);
    CHECK(fit.refit_rounds <= 2);
  }
  SUBCASE("labels outside {0,1} and single-class data rejected") {
    Matrix features = Matrix::Zero(4, 1);
    CHECK_THROWS_AS(fit_nonneg_logistic(features, {0, 1, 2, 0}, 0.1), DataError);
    CHECK_THROWS_AS(fit_nonneg_logistic(features, {1, 1, 1, 1}, 0.1), DataError);
  }
}

TEST_CASE("classify_track tie rule, scaling and permutation invariance") {
  Rng rng(233);
  ScenarioSpec spec;
  spec.dims = {4, 2};
  spec.grid = SpatialGrid{{2, 2}};
  spec.rank = 1;
  const auto truth = make_ground_truth(spec);
  const auto tracks = sample_tracks(truth.second, 4, 6, 77, spec.grid, "t", 1);

  LlrClassifier clf;
  clf.models.dims = spec.dims;
  clf.models.tree = build_block_tree(spec.grid, 2);
  clf.stride = 2;
  for (int k = 0; k < 2; ++k) {
    for (std::size_t j = 0; j < clf.models.tree.blocks.size(); ++j) {
      KronCovModel m =
          identity_model(static_cast<int>(clf.models.tree.blocks[j].indices.size()), 2,
                         1.0 + 0.5 * k);
      clf.models.models[k].push_back(std::move(m));
    }
  }
  clf.weights = Vector::Zero(3);
  clf.intercept = 0.0;

  SUBCASE("zero weights and intercept: score 0 resolves to class 0") {
    const auto [label, score] = classify_track(tracks[0], clf);
    CHECK(score == 0.0);
    CHECK(label == 0);
  }
  SUBCASE("positive rescaling never changes the label") {
    clf.weights << 0.5, 1.0, 0.1;
    clf.intercept = -0.2;
    for (const FeatureTrack& t : tracks) {
      const auto [label, score] = classify_track(t, clf);
      LlrClassifier scaled = clf;
      scaled.weights *= 7.5;
      scaled.intercept *= 7.5;
      const auto [label2, score2] = classify_track(t, scaled);
      CHECK(label == label2);
      CHECK(score2 == doctest::Approx(7.5 * score).epsilon(1e-12));
    }
  }
  SUBCASE("block permutation leaves the score unchanged") {
    clf.weights << 0.5, 1.0, 0.1;
    LlrClassifier permuted = clf;
    // swap the two leaf blocks together with their weights and models
    std::swap(permuted.models.tree.blocks[1], permuted.models.tree.blocks[2]);
    for (int k = 0; k < 2; ++k) {
      std::swap(permuted.models.models[k][1], permuted.models.models[k][2]);
    }
    std::swap(permuted.weights(1), permuted.weights(2));
    for (const FeatureTrack& t : tracks) {
      CHECK(classify_track(t, clf).second ==
            doctest::Approx(classify_track(t, permuted).second).epsilon(1e-12));
    }
  }
}

TEST_CASE("classify_overall is the single-block unit-weight special case") {
  ScenarioSpec spec;
  spec.dims = {4, 2};
  spec.grid = SpatialGrid{{2, 2}};
  spec.rank = 1;
  spec.seed = 13;
  const auto truth = make_ground_truth(spec);
  auto train = sample_tracks(truth.first, 12, 8, 100, spec.grid, "tr0_", 0);
  auto c1 = sample_tracks(truth.second, 12, 8, 101, spec.grid, "tr1_", 1);
  train.insert(train.end(), c1.begin(), c1.end());

  TrainOptions opts;
  opts.T = 2;
  opts.overall_only = true;
  opts.fit = make_default_fit();
  const LlrClassifier overall = train_llr_classifier(train, opts);
  CHECK(overall.models.tree.blocks.size() == 1);
  CHECK(overall.weights(0) == 1.0);
  CHECK(overall.intercept == 0.0);

  const auto tracks = sample_tracks(truth.second, 3, 6, 55, spec.grid, "te", 1);
  for (const FeatureTrack& t : tracks) {
    const auto via_track = classify_track(t, overall);
    const auto via_overall = classify_overall(t, overall.models);
    CHECK(via_track.second == via_overall.second);
    CHECK(via_track.first == via_overall.first);
  }

  // identical class models score exactly zero
  ClassModelSet same = overall.models;
  same.models[1] = same.models[0];
  for (const FeatureTrack& t : tracks) {
    CHECK(classify_overall(t, same).second == 0.0);
  }
}

TEST_CASE("well-separated classes classify above 90 percent") {
  ScenarioSpec spec;  // default scenario
  const auto truth = make_ground_truth(spec);
  auto train = sample_tracks(truth.first, 40, 12, 900, spec.grid, "tr0_", 0);
  auto t1 = sample_tracks(truth.second, 40, 12, 901, spec.grid, "tr1_", 1);
  train.insert(train.end(), t1.begin(), t1.end());

  TrainOptions opts;
  opts.T = 4;
  opts.levels = 3;
  opts.fit = make_default_fit();
  const LlrClassifier clf = train_llr_classifier(train, opts);
  CHECK(clf.weights.minCoeff() >= 0.0);

  auto test = sample_tracks(truth.first, 50, 12, 902, spec.grid, "te0_", 0);
  auto te1 = sample_tracks(truth.second, 50, 12, 903, spec.grid, "te1_", 1);
  test.insert(test.end(), te1.begin(), te1.end());
  int correct = 0;
  for (const FeatureTrack& t : test) {
    correct += (classify_track(t, clf).first == *t.label);
  }
  CHECK(static_cast<double>(correct) / test.size() > 0.9);
}

TEST_CASE("train_llr_classifier validates its inputs") {
  ScenarioSpec spec;
  spec.dims = {4, 2};
  spec.grid = SpatialGrid{{4}};
  const auto truth = make_ground_truth(spec);
  TrainOptions opts;
  opts.T = 2;
  opts.fit = make_default_fit();

  SUBCASE("missing labels rejected") {
    const auto tracks = sample_tracks(truth.first, 4, 6, 1, spec.grid, "x", std::nullopt);
    CHECK_THROWS_WITH_AS(train_llr_classifier(tracks, opts),
                         doctest::Contains("no label"), DataError);
  }
  SUBCASE("too few windows per class named in the error") {
    opts.levels = 2;
    auto tracks = sample_tracks(truth.first, 1, 2, 2, spec.grid, "a", 0);
    auto more = sample_tracks(truth.second, 4, 6, 3, spec.grid, "b", 1);
    tracks.insert(tracks.end(), more.begin(), more.end());
    CHECK_THROWS_WITH_AS(train_llr_classifier(tracks, opts),
                         doctest::Contains("class 0"), DataError);
  }
}
