#include "kroncov/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "kroncov/rng.hpp"

namespace kroncov {

EvalReport evaluate_results(const std::vector<ResultsRow>& rows) {
  EvalReport rep;
  for (const ResultsRow& r : rows) {
    if (!r.true_label) {
      throw DataError("evaluate_results: row '" + r.track_id + "' has no true label");
    }
    const int t = *r.true_label;
    const int pr = r.predicted_label;
    if (pr != 0 && pr != 1) {
      throw DataError("evaluate_results: predicted label must be 0 or 1");
    }
    ++rep.total;
    ++rep.confusion[t][pr];
    if (t == pr) ++rep.correct;
  }
  if (rep.total == 0) throw DataError("evaluate_results: no rows with truth");
  rep.accuracy = static_cast<double>(rep.correct) / rep.total;
  for (int k = 0; k < 2; ++k) {
    const int class_total = rep.confusion[k][0] + rep.confusion[k][1];
    rep.class_accuracy[k] =
        class_total > 0 ? static_cast<double>(rep.confusion[k][k]) / class_total : 0.0;
  }
  return rep;
}

FitConfig make_default_fit() {
  FitConfig cfg;
  cfg.target_rank = 2;
  return cfg;
}

namespace {

struct Task {
  int t_index;
  int n_index;
  int trial;
};

std::vector<FeatureTrack> make_track_pair(const std::pair<KronCovModel, KronCovModel>& truth,
                                          int per_class, int frames,
                                          const SpatialGrid& grid, std::uint64_t seed,
                                          const std::string& prefix) {
  std::vector<FeatureTrack> tracks =
      sample_tracks(truth.first, per_class, frames, derive_seed(seed, 0), grid,
                    prefix + "_c0_", 0);
  std::vector<FeatureTrack> c1 =
      sample_tracks(truth.second, per_class, frames, derive_seed(seed, 1), grid,
                    prefix + "_c1_", 1);
  tracks.insert(tracks.end(), std::make_move_iterator(c1.begin()),
                std::make_move_iterator(c1.end()));
  return tracks;
}

}  // namespace

SweepResult run_sweep(const SweepConfig& cfg) {
  cfg.scenario.validate();
  cfg.fit.validate();
  if (cfg.trials < 1) throw DataError("run_sweep: trials must be >= 1");
  for (const std::string& m : cfg.methods) {
    if (m != "logistic-llr" && m != "overall-llr") {
      throw DataError("run_sweep: unknown method '" + m + "'");
    }
  }
  const auto truth = make_ground_truth(cfg.scenario);

  std::vector<Task> tasks;
  for (int ti = 0; ti < static_cast<int>(cfg.fit_windows.size()); ++ti) {
    for (int ni = 0; ni < static_cast<int>(cfg.train_sizes.size()); ++ni) {
      for (int trial = 0; trial < cfg.trials; ++trial) tasks.push_back({ti, ni, trial});
    }
  }

  const bool want_logistic = std::find(cfg.methods.begin(), cfg.methods.end(),
                                       "logistic-llr") != cfg.methods.end();
  const bool want_overall = std::find(cfg.methods.begin(), cfg.methods.end(),
                                      "overall-llr") != cfg.methods.end();

  struct TaskOut {
    double logistic = std::numeric_limits<double>::quiet_NaN();
    double overall = std::numeric_limits<double>::quiet_NaN();
    std::string error;
  };
  std::vector<TaskOut> outs(tasks.size());

#pragma omp parallel for num_threads(effective_threads()) schedule(dynamic) \
    if (tasks.size() > 1)
  for (int idx = 0; idx < static_cast<int>(tasks.size()); ++idx) {
    const Task& task = tasks[idx];
    const int T = cfg.fit_windows[task.t_index];
    const int n = cfg.train_sizes[task.n_index];
    TaskOut& out = outs[idx];
    try {
      // fresh disjoint train/test draws per trial
      const std::uint64_t trial_seed =
          derive_seed(cfg.seed, static_cast<std::uint64_t>(task.trial),
                      (static_cast<std::uint64_t>(T) << 32) ^ static_cast<std::uint64_t>(n));
      const auto train = make_track_pair(truth, n / 2, cfg.frames_per_track,
                                         cfg.scenario.grid, derive_seed(trial_seed, 10),
                                         "train");
      const auto test = make_track_pair(truth, cfg.test_tracks / 2, cfg.frames_per_track,
                                        cfg.scenario.grid, derive_seed(trial_seed, 20),
                                        "test");
      TrainOptions opts;
      opts.T = T;
      opts.levels = cfg.levels;
      opts.fit = cfg.fit;
      const LlrClassifier clf = train_llr_classifier(train, opts);

      if (want_logistic) {
        const auto scored = classify_tracks(test, clf);
        std::vector<ResultsRow> rows;
        for (const TrackScore& s : scored) {
          rows.push_back(ResultsRow{s.track_id, s.true_label, s.predicted_label, s.score, {}});
        }
        out.logistic = evaluate_results(rows).accuracy;
      }
      if (want_overall) {
        int correct = 0, total = 0;
        for (const FeatureTrack& track : test) {
          if (track.frame_count() < T) continue;
          const auto [label, score] = classify_overall(track, clf.models);
          ++total;
          if (label == *track.label) ++correct;
        }
        if (total == 0) throw DataError("run_sweep: no scorable test tracks");
        out.overall = static_cast<double>(correct) / total;
      }
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  }

  SweepResult result;
  for (std::size_t idx = 0; idx < tasks.size(); ++idx) {
    const Task& task = tasks[idx];
    const int T = cfg.fit_windows[task.t_index];
    const int n = cfg.train_sizes[task.n_index];
    if (!outs[idx].error.empty()) {
      result.errors.push_back("T=" + std::to_string(T) + " n=" + std::to_string(n) +
                              " trial=" + std::to_string(task.trial) + ": " +
                              outs[idx].error);
    }
    for (const std::string& method : cfg.methods) {
      const double acc = method == "logistic-llr" ? outs[idx].logistic : outs[idx].overall;
      result.cells.push_back(SweepCell{method, T, n, task.trial, acc});
    }
  }
  std::sort(result.cells.begin(), result.cells.end(),
            [](const SweepCell& a, const SweepCell& b) {
              return std::tie(a.method, a.T, a.n, a.trial) <
                     std::tie(b.method, b.T, b.n, b.trial);
            });
  return result;
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "method,T,n,trial,accuracy\n";
  for (const SweepCell& c : result.cells) {
    out << c.method << ',' << c.T << ',' << c.n << ',' << c.trial << ','
        << (std::isnan(c.accuracy) ? std::string("nan") : format_double(c.accuracy)) << '\n';
  }
  if (!out) throw DataError("write_sweep_csv: write failed");
}

double mean_accuracy(const SweepResult& result, const std::string& method, int T, int n) {
  double sum = 0.0;
  int count = 0;
  for (const SweepCell& c : result.cells) {
    if (c.method == method && c.T == T && c.n == n && !std::isnan(c.accuracy)) {
      sum += c.accuracy;
      ++count;
    }
  }
  return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace kroncov
