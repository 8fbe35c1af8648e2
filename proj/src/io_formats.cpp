#include "kroncov/io_formats.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace kroncov {

namespace {

constexpr int kModelFormatVersion = 1;

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
  throw DataError(path + ":" + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view tok, const std::string& path, int line) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    parse_fail(path, line, "expected a number, got '" + std::string(tok) + "'");
  }
  if (!std::isfinite(v)) parse_fail(path, line, "non-finite value '" + std::string(tok) + "'");
  return v;
}

long long parse_int(std::string_view tok, const std::string& path, int line) {
  long long v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
    parse_fail(path, line, "expected an integer, got '" + std::string(tok) + "'");
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

SpatialGrid parse_grid(std::string_view text, const std::string& path, int line) {
  SpatialGrid grid;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t x = text.find('x', start);
    const std::string_view part =
        text.substr(start, x == std::string_view::npos ? std::string_view::npos : x - start);
    if (part.empty()) parse_fail(path, line, "malformed grid spec");
    grid.extents.push_back(static_cast<int>(parse_int(part, path, line)));
    if (x == std::string_view::npos) break;
    start = x + 1;
  }
  grid.validate();
  return grid;
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    line = strip_cr(std::move(line));
    ++lineno_;
    return true;
  }

  /// Next line, or a parse error mentioning what was expected.
  std::string require(const std::string& what) {
    std::string line;
    if (!next(line)) parse_fail(path_, lineno_ + 1, "unexpected end of file, expected " + what);
    return line;
  }

  int lineno() const { return lineno_; }
  const std::string& path() const { return path_; }

 private:
  std::istream& in_;
  std::string path_;
  int lineno_ = 0;
};

void write_vector(std::ostream& out, const std::string& key, const Vector& v) {
  out << key;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << format_double(v(i));
  out << '\n';
}

Vector read_keyed_vector(LineReader& reader, const std::string& key, Eigen::Index n) {
  const std::string line = reader.require("'" + key + "' line");
  const auto toks = split_ws(line);
  if (toks.empty() || toks[0] != key) {
    parse_fail(reader.path(), reader.lineno(), "expected '" + key + "' line");
  }
  if (static_cast<Eigen::Index>(toks.size()) != n + 1) {
    parse_fail(reader.path(), reader.lineno(),
               "'" + key + "' expects " + std::to_string(n) + " values, got " +
                   std::to_string(toks.size() - 1));
  }
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = parse_double(toks[i + 1], reader.path(), reader.lineno());
  }
  return v;
}

long long read_keyed_int(LineReader& reader, const std::string& key) {
  const std::string line = reader.require("'" + key + "' line");
  const auto toks = split_ws(line);
  if (toks.size() != 2 || toks[0] != key) {
    parse_fail(reader.path(), reader.lineno(), "expected '" + key + " <value>'");
  }
  return parse_int(toks[1], reader.path(), reader.lineno());
}

void write_model_body(std::ostream& out, const KronCovModel& model) {
  const int p = model.dims.p, T = model.dims.T;
  out << "p " << p << '\n';
  out << "T " << T << '\n';
  out << "rank " << model.separation_rank() << '\n';
  out << "rho " << format_double(model.rho) << '\n';
  out << "floor " << (model.eig_floor_applied ? 1 : 0) << '\n';
  write_vector(out, "mean", model.mean);
  write_vector(out, "U", model.diag_u);
  for (int i = 0; i < model.separation_rank(); ++i) {
    const auto& f = model.factors[i];
    out << "factor " << i << '\n';
    write_vector(out, "trow", f.temporal.row(0).transpose());
    write_vector(out, "tcol", f.temporal.col(0));
    Vector lower(p * (p + 1) / 2);
    int at = 0;
    for (int r = 0; r < p; ++r) {
      for (int c = 0; c <= r; ++c) lower(at++) = f.spatial(r, c);
    }
    write_vector(out, "S", lower);
  }
  out << "end\n";
}

KronCovModel read_model_body(LineReader& reader) {
  KronCovModel model;
  model.dims.p = static_cast<int>(read_keyed_int(reader, "p"));
  model.dims.T = static_cast<int>(read_keyed_int(reader, "T"));
  model.dims.validate();
  const int p = model.dims.p, T = model.dims.T;
  const int rank = static_cast<int>(read_keyed_int(reader, "rank"));
  if (rank < 0) parse_fail(reader.path(), reader.lineno(), "rank must be >= 0");

  {
    const std::string line = reader.require("'rho' line");
    const auto toks = split_ws(line);
    if (toks.size() != 2 || toks[0] != "rho") {
      parse_fail(reader.path(), reader.lineno(), "expected 'rho <value>'");
    }
    model.rho = parse_double(toks[1], reader.path(), reader.lineno());
    if (model.rho < 0.0 || model.rho > 1.0) {
      parse_fail(reader.path(), reader.lineno(), "rho outside [0, 1]");
    }
  }
  model.eig_floor_applied = read_keyed_int(reader, "floor") != 0;
  model.mean = read_keyed_vector(reader, "mean", static_cast<Eigen::Index>(p) * T);
  model.diag_u = read_keyed_vector(reader, "U", p);

  for (int i = 0; i < rank; ++i) {
    const std::string line = reader.require("'factor' line");
    const auto toks = split_ws(line);
    if (toks.size() != 2 || toks[0] != "factor" ||
        parse_int(toks[1], reader.path(), reader.lineno()) != i) {
      parse_fail(reader.path(), reader.lineno(), "expected 'factor " + std::to_string(i) + "'");
    }
    const Vector trow = read_keyed_vector(reader, "trow", T);
    const Vector tcol = read_keyed_vector(reader, "tcol", T);
    if (trow(0) != tcol(0)) {
      parse_fail(reader.path(), reader.lineno(), "factor first row/column disagree at (0,0)");
    }
    Matrix temporal(T, T);
    for (int s = 0; s < T; ++s) {
      for (int t = 0; t < T; ++t) {
        const int j = t - s;
        temporal(s, t) = j >= 0 ? trow(j) : tcol(-j);
      }
    }
    const Vector lower = read_keyed_vector(reader, "S", p * (p + 1) / 2);
    Matrix spatial(p, p);
    int at = 0;
    for (int r = 0; r < p; ++r) {
      for (int c = 0; c <= r; ++c) {
        spatial(r, c) = lower(at);
        spatial(c, r) = lower(at);
        ++at;
      }
    }
    model.factors.push_back(KronFactor{std::move(temporal), std::move(spatial)});
  }

  const std::string line = reader.require("'end' line");
  if (line != "end") parse_fail(reader.path(), reader.lineno(), "expected 'end'");
  return model;
}

void write_tree(std::ostream& out, const BlockTree& tree) {
  out << "grid " << tree.grid.to_string() << '\n';
  out << "levels " << tree.levels << '\n';
  out << "blocks " << tree.blocks.size() << '\n';
  for (std::size_t j = 0; j < tree.blocks.size(); ++j) {
    const Block& b = tree.blocks[j];
    out << "block " << j << ' ' << b.level;
    for (std::size_t a = 0; a < b.lo.size(); ++a) out << ' ' << b.lo[a] << ' ' << b.hi[a];
    out << '\n';
  }
}

BlockTree read_tree(LineReader& reader) {
  BlockTree tree;
  {
    const std::string line = reader.require("'grid' line");
    const auto toks = split_ws(line);
    if (toks.size() != 2 || toks[0] != "grid") {
      parse_fail(reader.path(), reader.lineno(), "expected 'grid <spec>'");
    }
    tree.grid = parse_grid(toks[1], reader.path(), reader.lineno());
  }
  tree.levels = static_cast<int>(read_keyed_int(reader, "levels"));
  const int blocks = static_cast<int>(read_keyed_int(reader, "blocks"));
  const int axes = static_cast<int>(tree.grid.extents.size());
  for (int j = 0; j < blocks; ++j) {
    const std::string line = reader.require("'block' line");
    const auto toks = split_ws(line);
    if (toks.size() != static_cast<std::size_t>(3 + 2 * axes) || toks[0] != "block" ||
        parse_int(toks[1], reader.path(), reader.lineno()) != j) {
      parse_fail(reader.path(), reader.lineno(), "expected 'block " + std::to_string(j) +
                                                     " <level> <lo hi per axis>'");
    }
    Block b;
    b.level = static_cast<int>(parse_int(toks[2], reader.path(), reader.lineno()));
    for (int a = 0; a < axes; ++a) {
      b.lo.push_back(static_cast<int>(parse_int(toks[3 + 2 * a], reader.path(), reader.lineno())));
      b.hi.push_back(
          static_cast<int>(parse_int(toks[4 + 2 * a], reader.path(), reader.lineno())));
      if (b.lo[a] < 0 || b.hi[a] > tree.grid.extents[a] || b.lo[a] >= b.hi[a]) {
        parse_fail(reader.path(), reader.lineno(), "block box outside the grid");
      }
    }
    std::vector<int> cursor = b.lo;
    while (true) {
      int flat = 0;
      for (int a = 0; a < axes; ++a) flat = flat * tree.grid.extents[a] + cursor[a];
      b.indices.push_back(flat);
      int a = axes - 1;
      while (a >= 0) {
        if (++cursor[a] < b.hi[a]) break;
        cursor[a] = b.lo[a];
        --a;
      }
      if (a < 0) break;
    }
    tree.blocks.push_back(std::move(b));
  }
  return tree;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: keep LF endings everywhere
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<FeatureTrack> read_tracks(const std::string& path) {
  std::ifstream in = open_in(path);
  LineReader reader(in, path);
  std::vector<FeatureTrack> tracks;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) continue;  // blank separators
    const auto toks = split_ws(line);
    if (toks.size() != 6 || toks[0] != "ftrk") {
      parse_fail(path, reader.lineno(), "expected 'ftrk 1 p=... grid=... id=... label=...'");
    }
    if (toks[1] != "1") {
      parse_fail(path, reader.lineno(), "unsupported ftrk version '" + std::string(toks[1]) + "'");
    }
    auto field = [&](std::string_view tok, std::string_view key) -> std::string_view {
      if (tok.size() < key.size() + 1 || tok.substr(0, key.size()) != key ||
          tok[key.size()] != '=') {
        parse_fail(path, reader.lineno(), "expected '" + std::string(key) + "=' field");
      }
      return tok.substr(key.size() + 1);
    };
    FeatureTrack track;
    const int p = static_cast<int>(parse_int(field(toks[2], "p"), path, reader.lineno()));
    track.grid = parse_grid(field(toks[3], "grid"), path, reader.lineno());
    if (track.grid.size() != p) {
      parse_fail(path, reader.lineno(),
                 "grid product " + std::to_string(track.grid.size()) + " != p " +
                     std::to_string(p));
    }
    track.id = std::string(field(toks[4], "id"));
    const std::string_view label = field(toks[5], "label");
    if (label == "0") {
      track.label = 0;
    } else if (label == "1") {
      track.label = 1;
    } else if (label == "?") {
      track.label.reset();
    } else {
      parse_fail(path, reader.lineno(), "label must be 0, 1 or ?");
    }

    std::vector<Vector> frames;
    while (reader.next(line)) {
      if (line.empty()) break;
      const auto vals = split_ws(line);
      if (static_cast<int>(vals.size()) != p) {
        parse_fail(path, reader.lineno(), "frame has " + std::to_string(vals.size()) +
                                              " values, expected p=" + std::to_string(p));
      }
      Vector frame(p);
      for (int i = 0; i < p; ++i) frame(i) = parse_double(vals[i], path, reader.lineno());
      frames.push_back(std::move(frame));
    }
    if (frames.empty()) {
      parse_fail(path, reader.lineno(), "track '" + track.id + "' has no frames");
    }
    track.frames.resize(frames.size(), p);
    for (std::size_t f = 0; f < frames.size(); ++f) track.frames.row(f) = frames[f].transpose();
    tracks.push_back(std::move(track));
  }
  return tracks;
}

void write_tracks(const std::vector<FeatureTrack>& tracks, const std::string& path) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const FeatureTrack& t = tracks[i];
    if (t.grid.size() != t.p()) throw DataError("write_tracks: grid product != p");
    if (i > 0) out << '\n';
    out << "ftrk 1 p=" << t.p() << " grid=" << t.grid.to_string() << " id=" << t.id
        << " label=" << (t.label ? std::to_string(*t.label) : std::string("?")) << '\n';
    for (int f = 0; f < t.frame_count(); ++f) {
      for (int c = 0; c < t.p(); ++c) {
        if (c > 0) out << ' ';
        out << format_double(t.frames(f, c));
      }
      out << '\n';
    }
  }
  if (!out) throw DataError("write_tracks: write to '" + path + "' failed");
}

void write_model(const KronCovModel& model, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "kroncov-model " << kModelFormatVersion << '\n';
  out << "kind model\n";
  write_model_body(out, model);
  if (!out) throw DataError("write_model: write to '" + path + "' failed");
}

void write_model(const LlrClassifier& classifier, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "kroncov-model " << kModelFormatVersion << '\n';
  out << "kind classifier\n";
  out << "p " << classifier.models.dims.p << '\n';
  out << "T " << classifier.models.dims.T << '\n';
  out << "stride " << classifier.stride << '\n';
  write_tree(out, classifier.models.tree);
  write_vector(out, "weights", classifier.weights);
  out << "intercept " << format_double(classifier.intercept) << '\n';
  for (int k = 0; k < 2; ++k) {
    for (std::size_t j = 0; j < classifier.models.models[k].size(); ++j) {
      out << "submodel " << k << ' ' << j << '\n';
      write_model_body(out, classifier.models.models[k][j]);
    }
  }
  out << "end\n";
  if (!out) throw DataError("write_model: write to '" + path + "' failed");
}

ModelFile read_model(const std::string& path) {
  std::ifstream in = open_in(path);
  LineReader reader(in, path);
  {
    const std::string line = reader.require("header");
    const auto toks = split_ws(line);
    if (toks.size() != 2 || toks[0] != "kroncov-model") {
      parse_fail(path, reader.lineno(), "not a kroncov model file");
    }
    const long long version = parse_int(toks[1], path, reader.lineno());
    if (version != kModelFormatVersion) {
      parse_fail(path, reader.lineno(),
                 "unsupported model format version " + std::to_string(version) +
                     " (supported: " + std::to_string(kModelFormatVersion) + ")");
    }
  }
  const std::string kind_line = reader.require("'kind' line");
  if (kind_line == "kind model") {
    return read_model_body(reader);
  }
  if (kind_line != "kind classifier") {
    parse_fail(path, reader.lineno(), "kind must be 'model' or 'classifier'");
  }

  LlrClassifier clf;
  clf.models.dims.p = static_cast<int>(read_keyed_int(reader, "p"));
  clf.models.dims.T = static_cast<int>(read_keyed_int(reader, "T"));
  clf.models.dims.validate();
  clf.stride = static_cast<int>(read_keyed_int(reader, "stride"));
  if (clf.stride < 1) parse_fail(path, reader.lineno(), "stride must be >= 1");
  clf.models.tree = read_tree(reader);
  const Eigen::Index blocks = static_cast<Eigen::Index>(clf.models.tree.blocks.size());
  clf.weights = read_keyed_vector(reader, "weights", blocks);
  if ((clf.weights.array() < 0.0).any()) {
    parse_fail(path, reader.lineno(), "weights must be >= 0");
  }
  {
    const std::string line = reader.require("'intercept' line");
    const auto toks = split_ws(line);
    if (toks.size() != 2 || toks[0] != "intercept") {
      parse_fail(path, reader.lineno(), "expected 'intercept <value>'");
    }
    clf.intercept = parse_double(toks[1], path, reader.lineno());
  }
  clf.models.models[0].resize(blocks);
  clf.models.models[1].resize(blocks);
  std::vector<std::vector<bool>> seen(2, std::vector<bool>(blocks, false));
  while (true) {
    const std::string line = reader.require("'submodel' or 'end'");
    if (line == "end") break;
    const auto toks = split_ws(line);
    if (toks.size() != 3 || toks[0] != "submodel") {
      parse_fail(path, reader.lineno(), "expected 'submodel <class> <block>'");
    }
    const long long k = parse_int(toks[1], path, reader.lineno());
    const long long j = parse_int(toks[2], path, reader.lineno());
    if (k < 0 || k > 1 || j < 0 || j >= blocks) {
      parse_fail(path, reader.lineno(), "submodel class/block out of range");
    }
    if (seen[k][j]) parse_fail(path, reader.lineno(), "duplicate submodel");
    seen[k][j] = true;
    clf.models.models[k][j] = read_model_body(reader);
  }
  for (int k = 0; k < 2; ++k) {
    for (Eigen::Index j = 0; j < blocks; ++j) {
      if (!seen[k][j]) {
        throw DataError(path + ": missing submodel class " + std::to_string(k) + " block " +
                        std::to_string(j));
      }
    }
  }
  return clf;
}

void write_results_csv(const std::vector<ResultsRow>& rows, const std::string& path) {
  std::ofstream out = open_out(path);
  const std::size_t llr_count = rows.empty() ? 0 : rows.front().block_llrs.size();
  out << "track_id,true_label,predicted_label,score";
  for (std::size_t j = 0; j < llr_count; ++j) out << ",llr_" << j;
  out << '\n';
  for (const ResultsRow& r : rows) {
    if (!std::isfinite(r.score)) throw DataError("write_results_csv: non-finite score");
    out << r.track_id << ',' << (r.true_label ? std::to_string(*r.true_label) : std::string())
        << ',' << r.predicted_label << ',' << format_double(r.score);
    if (r.block_llrs.size() != llr_count) {
      throw DataError("write_results_csv: inconsistent llr column count");
    }
    for (double v : r.block_llrs) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw DataError("write_results_csv: write to '" + path + "' failed");
}

std::vector<ResultsRow> read_results_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  LineReader reader(in, path);
  std::string line;
  if (!reader.next(line)) throw DataError(path + ": empty results file");
  auto split_csv = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = s.find(',', start);
      out.push_back(s.substr(start, comma == std::string::npos ? std::string::npos
                                                               : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    return out;
  };
  const auto header = split_csv(line);
  if (header.size() < 4 || header[0] != "track_id" || header[1] != "true_label" ||
      header[2] != "predicted_label" || header[3] != "score") {
    parse_fail(path, reader.lineno(), "unexpected results header");
  }
  const std::size_t cols = header.size();
  std::vector<ResultsRow> rows;
  while (reader.next(line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != cols) {
      parse_fail(path, reader.lineno(), "row has " + std::to_string(f.size()) +
                                            " fields, header has " + std::to_string(cols));
    }
    ResultsRow r;
    r.track_id = f[0];
    if (!f[1].empty()) {
      const long long v = parse_int(f[1], path, reader.lineno());
      if (v != 0 && v != 1) parse_fail(path, reader.lineno(), "true_label must be 0 or 1");
      r.true_label = static_cast<int>(v);
    }
    r.predicted_label = static_cast<int>(parse_int(f[2], path, reader.lineno()));
    r.score = parse_double(f[3], path, reader.lineno());
    for (std::size_t j = 4; j < cols; ++j) {
      r.block_llrs.push_back(parse_double(f[j], path, reader.lineno()));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace kroncov
