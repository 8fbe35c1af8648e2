#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kroncov/classifier.hpp"
#include "kroncov/io_formats.hpp"
#include "kroncov/synth.hpp"

namespace kroncov {

struct EvalReport {
  int total = 0;
  int correct = 0;
  int confusion[2][2] = {{0, 0}, {0, 0}};  // [true][predicted]
  double accuracy = 0.0;
  double class_accuracy[2] = {0.0, 0.0};
};

/// Accuracy and confusion counts; every row must carry a true label.
EvalReport evaluate_results(const std::vector<ResultsRow>& rows);

struct SweepConfig {
  ScenarioSpec scenario;          // scenario.dims.T is the generator window
  std::vector<int> train_sizes;   // tracks per training set (both classes together)
  std::vector<int> fit_windows;   // classifier T values
  std::vector<std::string> methods{"logistic-llr", "overall-llr"};
  int test_tracks = 500;
  int frames_per_track = 12;
  int trials = 10;
  int levels = 4;
  FitConfig fit;                  // default target_rank 2 set by make_default_fit()
  std::uint64_t seed = 1;
};

FitConfig make_default_fit();

struct SweepCell {
  std::string method;
  int T = 0;
  int n = 0;
  int trial = 0;
  double accuracy = 0.0;  // NaN when the trial failed
};

/// Monte Carlo accuracy grid over (method, T, n, trial); disjoint train/test
/// tracks per trial; rows sorted by (method, T, n, trial). Failed cells hold
/// NaN and a note in `errors`.
struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<std::string> errors;
};

SweepResult run_sweep(const SweepConfig& cfg);

void write_sweep_csv(const SweepResult& result, const std::string& path);

/// Mean accuracy over trials for one (method, T, n) cell; NaN cells skipped.
double mean_accuracy(const SweepResult& result, const std::string& method, int T, int n);

}  // namespace kroncov
