#include "kroncov/synth.hpp"

#include <cmath>

#include "doctest.h"
#include "kroncov/estimator.hpp"
#include "kroncov/classifier.hpp"
#include "kroncov/kron_algebra.hpp"
#include "kroncov/reference.hpp"
#include "test_util.hpp"

using namespace kroncov;

TEST_CASE("ground truth classes coincide when nothing separates them") {
  ScenarioSpec spec;
  spec.dims = {6, 3};
  spec.grid = SpatialGrid{{2, 3}};
  spec.mean_separation = 0.0;
  spec.temporal_decay[0] = spec.temporal_decay[1] = 0.4;
  const auto [m0, m1] = make_ground_truth(spec);
  CHECK((m0.mean - m1.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m0.covariance() - m1.covariance()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero decay gives temporally white factors") {
  ScenarioSpec spec;
  spec.dims = {4, 3};
  spec.grid = SpatialGrid{{4}};
  spec.rank = 1;
  spec.temporal_decay[0] = 0.0;
  const auto [m0, m1] = make_ground_truth(spec);
  CHECK((m0.factors[0].temporal - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rank-one scenario composes block-Toeplitz with rank-one rearrangement") {
  ScenarioSpec spec;
  spec.dims = {8, 4};
  spec.grid = SpatialGrid{{2, 4}};
  spec.rank = 1;
  spec.seed = 7;
  const auto [m0, m1] = make_ground_truth(spec);
  const Matrix sigma = m0.covariance();
  CHECK(is_block_toeplitz(sigma, spec.dims, 1e-10));

  const Matrix lowrank = sigma - reference::kron_compose({}, m0.diag_u, spec.dims);
  const Vector sv = Eigen::JacobiSVD<Matrix>(rearrange(lowrank, spec.dims).data)
                        .singularValues();
  for (Eigen::Index i = 1; i < sv.size(); ++i) CHECK(sv(i) <= 1e-10 * sv(0));

  Eigen::LLT<Matrix> llt(sigma);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("identity-covariance tracks look like iid standard normals") {
  KronCovModel model;
  model.dims = {5, 2};
  model.mean = Vector::Zero(10);
  model.diag_u = Vector::Ones(5);
  const auto tracks =
      sample_tracks(model, 250, 8, 99, SpatialGrid{{5}}, "iid", std::nullopt);
  double sum = 0.0, sum2 = 0.0;
  int count = 0;
  for (const auto& t : tracks) {
    sum += t.frames.sum();
    sum2 += t.frames.squaredNorm();
    count += static_cast<int>(t.frames.size());
  }
  REQUIRE(count == 10000);
  const double mean = sum / count;
  const double var = sum2 / count - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(var > 0.9);
  CHECK(var < 1.1);
}

TEST_CASE("tiny noise floor pins tracks to the mean") {
  KronCovModel model;
  model.dims = {3, 2};
  Vector frame_mean(3);
  frame_mean << 5.0, -2.0, 1.0;
  model.mean.resize(6);
  model.mean << frame_mean, frame_mean;
  model.diag_u = Vector::Constant(3, 1e-8);
  const auto tracks = sample_tracks(model, 30, 10, 3, SpatialGrid{{3}}, "q", 1);
  const double sd = 1e-4;
  int within = 0, total = 0;
  for (const auto& t : tracks) {
    for (int f = 0; f < t.frame_count(); ++f) {
      for (int c = 0; c < 3; ++c) {
        ++total;
        if (std::abs(t.frames(f, c) - frame_mean(c)) <= 3.0 * sd) ++within;
      }
    }
  }
  CHECK(static_cast<double>(within) / total >= 0.98);
}

TEST_CASE("sampling is reproducible per seed and varies across seeds") {
  ScenarioSpec spec;
  spec.dims = {4, 2};
  spec.grid = SpatialGrid{{4}};
  const auto truth = make_ground_truth(spec);
  const auto a = sample_tracks(truth.first, 5, 7, 42, spec.grid, "s", 0);
  const auto b = sample_tracks(truth.first, 5, 7, 42, spec.grid, "s", 0);
  const auto c = sample_tracks(truth.first, 5, 7, 43, spec.grid, "s", 0);
  for (int i = 0; i < 5; ++i) {
    CHECK((a[i].frames - b[i].frames).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((a[0].frames - c[0].frames).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("every window of a sampled track carries the model covariance") {
  ScenarioSpec spec;
  spec.dims = {4, 3};
  spec.grid = SpatialGrid{{2, 2}};
  spec.rank = 1;
  spec.seed = 21;
  const auto truth = make_ground_truth(spec);
  const Matrix sigma = truth.first.covariance();

  // overlapping windows from long tracks exercise the sequential extension
  const auto tracks = sample_tracks(truth.first, 500, 23, 8, spec.grid, "w", 0);
  SampleSet pooled;
  pooled.dims = spec.dims;
  pooled.samples.resize(500 * 21, 12);
  int at = 0;
  for (const auto& t : tracks) {
    const SampleSet w = multiframe_windows(t, 3, 1);
    pooled.samples.middleRows(at, w.n()) = w.samples;
    at += w.n();
  }
  REQUIRE(at == 500 * 21);
  const auto [mean, scm] = sample_mean_cov(pooled);
  CHECK(testutil::rel_error(scm, sigma) < 0.05);
  CHECK((mean - truth.first.mean).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("sample_tracks input validation") {
  KronCovModel model;
  model.dims = {2, 3};
  model.mean = Vector::Zero(6);
  model.diag_u = Vector::Ones(2);
  CHECK_THROWS_AS(sample_tracks(model, 2, 2, 1, SpatialGrid{{2}}, "x", 0), DataError);

  KronCovModel bad = model;
  bad.diag_u = Vector::Constant(2, -1.0);  // indefinite
  CHECK_THROWS_AS(sample_tracks(bad, 2, 5, 1, SpatialGrid{{2}}, "x", 0), NumericError);
}

TEST_CASE("sample_multivariate draws have the requested moments") {
  Matrix cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.0;
  Vector mean(2);
  mean << 1.0, -1.0;
  const SampleSet data = sample_multivariate(mean, cov, {2, 1}, 8000, 5);
  const auto [m, s] = sample_mean_cov(data);
  CHECK((m - mean).cwiseAbs().maxCoeff() < 0.1);
  CHECK(testutil::rel_error(s, cov) < 0.1);
}
