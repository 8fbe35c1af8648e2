// Command line front end: simulate -> fit -> classify -> eval, plus the
// Monte Carlo sweep harness and model inspection.

#include <CLI11.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "kroncov/classifier.hpp"
#include "kroncov/estimator.hpp"
#include "kroncov/harness.hpp"
#include "kroncov/io_formats.hpp"
#include "kroncov/kron_algebra.hpp"
#include "kroncov/rng.hpp"
#include "kroncov/shrinkage.hpp"
#include "kroncov/synth.hpp"

namespace {

using namespace kroncov;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

SpatialGrid parse_grid_arg(const std::string& text) {
  SpatialGrid grid;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t x = text.find('x', start);
    const std::string part = text.substr(start, x == std::string::npos ? std::string::npos
                                                                       : x - start);
    if (part.empty()) throw DataError("malformed grid '" + text + "'");
    grid.extents.push_back(std::stoi(part));
    if (x == std::string::npos) break;
    start = x + 1;
  }
  grid.validate();
  return grid;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string part = text.substr(start, comma == std::string::npos
                                                    ? std::string::npos
                                                    : comma - start);
    if (part.empty()) throw DataError("malformed integer list '" + text + "'");
    out.push_back(std::stoi(part));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

struct ScenarioFlags {
  std::string grid = "4x4";
  int T = 4;
  int rank = 2;
  double sep = 0.45;
  double decay0 = 0.15;
  double decay1 = 0.75;
  double noise = 0.25;
  std::uint64_t seed = 1;
  int p_check = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--grid", grid, "spatial grid extents, e.g. 4x4 or 4x4x2");
    cmd->add_option("--T", T, "temporal window length of the generator");
    cmd->add_option("--rank-truth", rank, "separation rank of the ground truth");
    cmd->add_option("--sep", sep, "class mean separation");
    cmd->add_option("--decay0", decay0, "class 0 temporal decay");
    cmd->add_option("--decay1", decay1, "class 1 temporal decay");
    cmd->add_option("--noise", noise, "diagonal noise floor");
    cmd->add_option("--seed", seed, "RNG seed");
    cmd->add_option("--p", p_check, "expected feature count (cross-check against grid)");
  }

  ScenarioSpec to_spec() const {
    ScenarioSpec spec;
    spec.grid = parse_grid_arg(grid);
    if (p_check > 0 && p_check != spec.grid.size()) {
      throw DataError("p=" + std::to_string(p_check) + " does not match grid product " +
                      std::to_string(spec.grid.size()));
    }
    spec.dims = SpaceTimeDims{spec.grid.size(), T};
    spec.rank = rank;
    spec.mean_separation = sep;
    spec.temporal_decay[0] = decay0;
    spec.temporal_decay[1] = decay1;
    spec.noise_floor = noise;
    spec.seed = seed;
    return spec;
  }
};

int cmd_simulate(const ScenarioFlags& flags, const std::string& out_dir, int train_tracks,
                 int test_tracks, int frames) {
  const ScenarioSpec spec = flags.to_spec();
  const auto truth = make_ground_truth(spec);
  std::filesystem::create_directories(out_dir);

  auto build = [&](int count, std::uint64_t salt, const std::string& prefix) {
    auto tracks = sample_tracks(truth.first, count / 2, frames,
                                derive_seed(spec.seed, salt, 0), spec.grid,
                                prefix + "_c0_", 0);
    auto c1 = sample_tracks(truth.second, count - count / 2, frames,
                            derive_seed(spec.seed, salt, 1), spec.grid,
                            prefix + "_c1_", 1);
    tracks.insert(tracks.end(), c1.begin(), c1.end());
    return tracks;
  };
  const auto train = build(train_tracks, 10, "train");
  const auto test = build(test_tracks, 20, "test");
  const std::string train_path = (std::filesystem::path(out_dir) / "train.ftrk").string();
  const std::string test_path = (std::filesystem::path(out_dir) / "test.ftrk").string();
  write_tracks(train, train_path);
  write_tracks(test, test_path);

  std::printf("scenario p=%d T=%d grid=%s rank=%d seed=%llu\n", spec.dims.p, spec.dims.T,
              spec.grid.to_string().c_str(), spec.rank,
              static_cast<unsigned long long>(spec.seed));
  std::printf("train %s tracks=%zu frames=%d\n", train_path.c_str(), train.size(), frames);
  std::printf("test %s tracks=%zu frames=%d\n", test_path.c_str(), test.size(), frames);
  return 0;
}

int cmd_fit(const std::string& train_path, const std::string& model_path, int T, int levels,
            std::optional<int> rank, std::optional<double> beta,
            std::optional<double> rho, bool overall, int stride) {
  const auto tracks = read_tracks(train_path);
  TrainOptions opts;
  opts.T = T;
  opts.levels = levels;
  opts.stride = stride;
  opts.overall_only = overall;
  opts.rho_override = rho;
  if (beta) {
    opts.fit.beta = *beta;
  } else {
    opts.fit.target_rank = rank.value_or(2);
  }
  const LlrClassifier clf = train_llr_classifier(tracks, opts);
  write_model(clf, model_path);

  int positive = 0;
  for (Eigen::Index j = 0; j < clf.weights.size(); ++j) {
    if (clf.weights(j) > 0.0) ++positive;
  }
  std::printf("fitted %zu blocks (levels=%d, T=%d), %d with positive weight\n",
              clf.models.tree.blocks.size(), clf.models.tree.levels, T, positive);
  std::printf("model written to %s\n", model_path.c_str());
  return 0;
}

int cmd_classify(const std::string& model_path, const std::string& test_path,
                 const std::string& out_path) {
  const ModelFile file = read_model(model_path);
  if (!std::holds_alternative<LlrClassifier>(file)) {
    throw DataError("classify: '" + model_path + "' holds a bare model, need a classifier");
  }
  const LlrClassifier& clf = std::get<LlrClassifier>(file);
  const auto tracks = read_tracks(test_path);
  for (const FeatureTrack& t : tracks) {
    if (t.p() != clf.models.dims.p) {
      throw DataError("classify: track '" + t.id + "' has p=" + std::to_string(t.p()) +
                      " but model expects p=" + std::to_string(clf.models.dims.p));
    }
  }
  std::vector<std::string> skipped;
  const auto scored = classify_tracks(tracks, clf, &skipped);
  std::vector<ResultsRow> rows;
  rows.reserve(scored.size());
  for (const TrackScore& s : scored) {
    ResultsRow r;
    r.track_id = s.track_id;
    r.true_label = s.true_label;
    r.predicted_label = s.predicted_label;
    r.score = s.score;
    r.block_llrs.assign(s.block_llrs.data(), s.block_llrs.data() + s.block_llrs.size());
    rows.push_back(std::move(r));
  }
  write_results_csv(rows, out_path);
  std::printf("classified %zu tracks -> %s\n", rows.size(), out_path.c_str());
  if (!skipped.empty()) {
    std::printf("skipped %zu track(s) shorter than T=%d:", skipped.size(),
                clf.models.dims.T);
    for (const std::string& id : skipped) std::printf(" %s", id.c_str());
    std::printf("\n");
  }
  return 0;
}

int cmd_eval(const std::string& results_path) {
  const auto rows = read_results_csv(results_path);
  const EvalReport rep = evaluate_results(rows);
  std::printf("tracks=%d correct=%d\n", rep.total, rep.correct);
  std::printf("confusion true0_pred0=%d true0_pred1=%d true1_pred0=%d true1_pred1=%d\n",
              rep.confusion[0][0], rep.confusion[0][1], rep.confusion[1][0],
              rep.confusion[1][1]);
  std::printf("class0_accuracy=%s\n", format_double(rep.class_accuracy[0]).c_str());
  std::printf("class1_accuracy=%s\n", format_double(rep.class_accuracy[1]).c_str());
  std::printf("accuracy=%s\n", format_double(rep.accuracy).c_str());
  return 0;
}

int cmd_sweep(const ScenarioFlags& flags, const std::string& out_path,
              const std::string& n_list, const std::string& t_list,
              const std::string& methods, int trials, int test_tracks, int frames,
              int levels, std::optional<int> rank, std::optional<double> beta) {
  SweepConfig cfg;
  cfg.scenario = flags.to_spec();
  cfg.train_sizes = parse_int_list(n_list);
  cfg.fit_windows = parse_int_list(t_list);
  cfg.methods.clear();
  std::size_t start = 0;
  while (start <= methods.size()) {
    const std::size_t comma = methods.find(',', start);
    cfg.methods.push_back(methods.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  cfg.trials = trials;
  cfg.test_tracks = test_tracks;
  cfg.frames_per_track = frames;
  cfg.levels = levels;
  if (beta) {
    cfg.fit.beta = *beta;
    cfg.fit.target_rank.reset();
  } else {
    cfg.fit.target_rank = rank.value_or(2);
  }
  cfg.seed = flags.seed;

  const SweepResult result = run_sweep(cfg);
  write_sweep_csv(result, out_path);
  for (const std::string& err : result.errors) {
    std::fprintf(stderr, "sweep cell failed: %s\n", err.c_str());
  }
  for (const std::string& method : cfg.methods) {
    for (int T : cfg.fit_windows) {
      for (int n : cfg.train_sizes) {
        std::printf("mean method=%s T=%d n=%d accuracy=%s\n", method.c_str(), T, n,
                    format_double(mean_accuracy(result, method, T, n)).c_str());
      }
    }
  }
  std::printf("sweep written to %s\n", out_path.c_str());
  return 0;
}

void inspect_model(const KronCovModel& model, const std::string& heading) {
  std::printf("%s p=%d T=%d rank=%d rho=%s floor=%d\n", heading.c_str(), model.dims.p,
              model.dims.T, model.separation_rank(), format_double(model.rho).c_str(),
              model.eig_floor_applied ? 1 : 0);
  if (model.rho < 0.0 || model.rho > 1.0) throw DataError("inspect: rho outside [0, 1]");

  if (model.separation_rank() > 0) {
    const Matrix lowrank = kron_compose(model.factors, Vector::Zero(model.dims.p),
                                        model.dims);
    const Matrix collapsed = toeplitz_collapse(rearrange(lowrank, model.dims)).data;
    const Vector sv = Eigen::JacobiSVD<Matrix>(collapsed).singularValues();
    std::printf("  singular values:");
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(sv.size(), model.separation_rank());
         ++i) {
      std::printf(" %s", format_double(sv(i)).c_str());
    }
    std::printf("\n");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(model.covariance(), Eigen::EigenvaluesOnly);
  std::printf("  eigenvalues min=%s max=%s\n",
              format_double(eig.eigenvalues()(0)).c_str(),
              format_double(eig.eigenvalues()(eig.eigenvalues().size() - 1)).c_str());
  for (int i = 0; i < model.separation_rank(); ++i) {
    const Matrix& t = model.factors[i].temporal;
    std::printf("  factor %d temporal first row:", i);
    for (int c = 0; c < model.dims.T; ++c) std::printf(" %s", format_double(t(0, c)).c_str());
    std::printf("  |S|_F=%s\n", format_double(model.factors[i].spatial.norm()).c_str());
  }
}

int cmd_inspect(const std::string& model_path) {
  const ModelFile file = read_model(model_path);
  if (std::holds_alternative<KronCovModel>(file)) {
    inspect_model(std::get<KronCovModel>(file), "model");
    return 0;
  }
  const LlrClassifier& clf = std::get<LlrClassifier>(file);
  std::printf("classifier p=%d T=%d grid=%s levels=%d blocks=%zu stride=%d\n",
              clf.models.dims.p, clf.models.dims.T,
              clf.models.tree.grid.to_string().c_str(), clf.models.tree.levels,
              clf.models.tree.blocks.size(), clf.stride);
  std::printf("intercept=%s weights:", format_double(clf.intercept).c_str());
  for (Eigen::Index j = 0; j < clf.weights.size(); ++j) {
    std::printf(" %s", format_double(clf.weights(j)).c_str());
  }
  std::printf("\n");
  for (int k = 0; k < 2; ++k) {
    for (std::size_t j = 0; j < clf.models.models[k].size(); ++j) {
      inspect_model(clf.models.models[k][j],
                    "class " + std::to_string(k) + " block " + std::to_string(j));
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"block-Toeplitz Kronecker covariance models and LLR classifiers"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "write synthetic two-class track files");
  ScenarioFlags sim_flags;
  sim_flags.add_to(sim);
  std::string sim_out = "data";
  int train_tracks = 100, test_tracks = 100, frames = 12;
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--train-tracks", train_tracks, "training track count (split over classes)");
  sim->add_option("--test-tracks", test_tracks, "test track count");
  sim->add_option("--frames", frames, "frames per track");

  // fit
  auto* fit = app.add_subcommand("fit", "train a classifier on labeled tracks");
  std::string fit_train, fit_model = "model.kcm";
  int fit_T = 4, fit_levels = 4, fit_stride = 0;
  std::optional<int> fit_rank;
  std::optional<double> fit_beta, fit_rho;
  bool fit_overall = false;
  fit->add_option("--train", fit_train, "training ftrk file")->required();
  fit->add_option("--model", fit_model, "output model path");
  fit->add_option("--T", fit_T, "multiframe window length");
  fit->add_option("--levels", fit_levels, "dyadic decomposition depth");
  auto* rank_opt = fit->add_option("--rank", fit_rank, "target separation rank");
  auto* beta_opt = fit->add_option("--beta", fit_beta, "nuclear norm penalty");
  rank_opt->excludes(beta_opt);
  beta_opt->excludes(rank_opt);
  fit->add_option("--rho", fit_rho, "shrinkage override in [0,1] (default Ledoit-Wolf)");
  fit->add_option("--stride", fit_stride, "window stride (default T, non-overlapping)");
  fit->add_flag("--overall", fit_overall, "single-block quadratic classifier");

  // classify
  auto* cls = app.add_subcommand("classify", "score tracks with a trained classifier");
  std::string cls_model, cls_test, cls_out = "results.csv";
  cls->add_option("--model", cls_model, "classifier file")->required();
  cls->add_option("--test", cls_test, "test ftrk file")->required();
  cls->add_option("--out", cls_out, "results CSV path");

  // eval
  auto* ev = app.add_subcommand("eval", "accuracy report from a results CSV");
  std::string ev_results;
  ev->add_option("--results", ev_results, "results CSV with truth")->required();

  // sweep
  auto* sw = app.add_subcommand("sweep", "Monte Carlo accuracy grid over (method, T, n)");
  ScenarioFlags sw_flags;
  sw_flags.add_to(sw);
  std::string sw_out = "sweep.csv", sw_n = "100,500", sw_T = "1,4";
  std::string sw_methods = "logistic-llr,overall-llr";
  int sw_trials = 10, sw_test_tracks = 500, sw_frames = 12, sw_levels = 4;
  std::optional<int> sw_rank;
  std::optional<double> sw_beta;
  sw->add_option("--out", sw_out, "output CSV");
  sw->add_option("--n-list", sw_n, "training sizes, comma separated");
  sw->add_option("--T-list", sw_T, "window lengths, comma separated");
  sw->add_option("--methods", sw_methods, "logistic-llr,overall-llr");
  sw->add_option("--trials", sw_trials, "Monte Carlo trials per cell");
  sw->add_option("--test-tracks", sw_test_tracks, "test tracks per trial");
  sw->add_option("--frames", sw_frames, "frames per track");
  sw->add_option("--levels", sw_levels, "dyadic decomposition depth");
  sw->add_option("--rank", sw_rank, "target separation rank");
  sw->add_option("--beta", sw_beta, "nuclear norm penalty (overrides --rank)");

  // inspect
  auto* ins = app.add_subcommand("inspect", "summarize a model or classifier file");
  std::string ins_model;
  ins->add_option("--model", ins_model, "model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_flags, sim_out, train_tracks, test_tracks, frames);
    }
    if (fit->parsed()) {
      return cmd_fit(fit_train, fit_model, fit_T, fit_levels, fit_rank, fit_beta, fit_rho,
                     fit_overall, fit_stride);
    }
    if (cls->parsed()) return cmd_classify(cls_model, cls_test, cls_out);
    if (ev->parsed()) return cmd_eval(ev_results);
    if (sw->parsed()) {
      return cmd_sweep(sw_flags, sw_out, sw_n, sw_T, sw_methods, sw_trials, sw_test_tracks,
                       sw_frames, sw_levels, sw_rank, sw_beta);
    }
    if (ins->parsed()) return cmd_inspect(ins_model);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return kExitNumeric;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
