#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "kroncov/classifier.hpp"
#include "kroncov/estimator.hpp"
#include "kroncov/types.hpp"

namespace kroncov {

/// Shortest decimal that parses back to the identical double.
std::string format_double(double v);

// Track files ("ftrk"): one header line per track
//   ftrk 1 p=<p> grid=<a>x<b>[x<c>] id=<track_id> label=<0|1|?>
// followed by one line of p space-separated floats per frame; tracks are
// separated by a single blank line. UTF-8, LF endings.
std::vector<FeatureTrack> read_tracks(const std::string& path);
void write_tracks(const std::vector<FeatureTrack>& tracks, const std::string& path);

// Model files: line-oriented key/value document, version-checked. Toeplitz
// temporal factors stored as first row + first column; spatial factors as the
// lower triangle. Holds either a single model or a full classifier.
void write_model(const KronCovModel& model, const std::string& path);
void write_model(const LlrClassifier& classifier, const std::string& path);
using ModelFile = std::variant<KronCovModel, LlrClassifier>;
ModelFile read_model(const std::string& path);

struct ResultsRow {
  std::string track_id;
  std::optional<int> true_label;
  int predicted_label = 0;
  double score = 0.0;
  std::vector<double> block_llrs;
};

// CSV with header track_id,true_label,predicted_label,score[,llr_0..llr_{B-1}]
void write_results_csv(const std::vector<ResultsRow>& rows, const std::string& path);
std::vector<ResultsRow> read_results_csv(const std::string& path);

}  // namespace kroncov
