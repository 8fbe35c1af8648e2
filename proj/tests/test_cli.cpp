#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "kroncov/io_formats.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = KRONCOV_CLI_PATH;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "kroncov_cli_test";
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args, const std::string& out_file = "/dev/null") {
  const std::string cmd = kCli + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("pipeline is byte-deterministic under a fixed seed") {
  TempDir dir;
  const std::string common =
      " --grid 2x3 --T 2 --train-tracks 40 --test-tracks 20 --frames 6 --seed 99";
  for (const std::string side : {"a", "b"}) {
    const std::string d = dir.file(side);
    REQUIRE(run("simulate --out " + d + common) == 0);
    REQUIRE(run("fit --train " + d + "/train.ftrk --model " + d + "/m.kcm --T 2 --levels 2") ==
            0);
    REQUIRE(run("classify --model " + d + "/m.kcm --test " + d + "/test.ftrk --out " + d +
                "/r.csv") == 0);
    REQUIRE(run("eval --results " + d + "/r.csv", d + "/eval.txt") == 0);
  }
  for (const std::string name :
       {"/train.ftrk", "/test.ftrk", "/m.kcm", "/r.csv", "/eval.txt"}) {
    CHECK(slurp(dir.file("a") + name) == slurp(dir.file("b") + name));
    CHECK_FALSE(slurp(dir.file("a") + name).empty());
  }
  const std::string eval_out = slurp(dir.file("a") + "/eval.txt");
  CHECK(eval_out.find("accuracy=") != std::string::npos);
}

TEST_CASE("overall flag matches the explicit single-level classifier") {
  TempDir dir;
  const std::string d = dir.file("d");
  REQUIRE(run("simulate --out " + d +
              " --grid 2x2 --T 2 --train-tracks 30 --test-tracks 4 --frames 6 --seed 7") == 0);
  REQUIRE(run("fit --train " + d + "/train.ftrk --model " + dir.file("o1.kcm") +
              " --T 2 --overall") == 0);
  REQUIRE(run("fit --train " + d + "/train.ftrk --model " + dir.file("o2.kcm") +
              " --T 2 --overall --levels 1") == 0);
  CHECK(slurp(dir.file("o1.kcm")) == slurp(dir.file("o2.kcm")));

  // the stored weights are the unit single-block combination
  const auto clf = std::get<kroncov::LlrClassifier>(kroncov::read_model(dir.file("o1.kcm")));
  CHECK(clf.models.tree.blocks.size() == 1);
  CHECK(clf.weights(0) == 1.0);
  CHECK(clf.intercept == 0.0);
}

TEST_CASE("exit codes follow the usage/data/numeric taxonomy") {
  TempDir dir;
  SUBCASE("unknown flag is a usage error") {
    CHECK(run("fit --no-such-flag") == 1);
    CHECK(run("") == 1);
  }
  SUBCASE("grid/p mismatch is a data error") {
    CHECK(run("simulate --out " + dir.file("x") + " --grid 2x2 --p 5") == 2);
  }
  SUBCASE("rank and beta are mutually exclusive") {
    CHECK(run("fit --train nowhere.ftrk --rank 2 --beta 0.5") == 1);
  }
  SUBCASE("missing files are data errors") {
    CHECK(run("classify --model nope.kcm --test nope.ftrk") == 2);
    CHECK(run("eval --results nope.csv") == 2);
    CHECK(run("inspect --model nope.kcm") == 2);
  }
}

TEST_CASE("classify reports dimension mismatches and skipped tracks") {
  TempDir dir;
  const std::string d = dir.file("d");
  REQUIRE(run("simulate --out " + d +
              " --grid 2x2 --T 2 --train-tracks 30 --test-tracks 6 --frames 6 --seed 3") == 0);
  REQUIRE(run("fit --train " + d + "/train.ftrk --model " + dir.file("m.kcm") +
              " --T 2 --levels 2") == 0);

  SUBCASE("track with wrong p names both dimensions") {
    std::ofstream out(dir.file("bad.ftrk"), std::ios::binary);
    out << "ftrk 1 p=3 grid=3 id=w label=0\n1 2 3\n1 2 3\n";
    out.close();
    const int code = run("classify --model " + dir.file("m.kcm") + " --test " +
                             dir.file("bad.ftrk") + " --out " + dir.file("r.csv"),
                         dir.file("log.txt"));
    CHECK(code == 2);
    const std::string log = slurp(dir.file("log.txt"));
    CHECK(log.find("p=3") != std::string::npos);
    CHECK(log.find("p=4") != std::string::npos);
  }

  SUBCASE("short tracks are skipped and listed") {
    std::ofstream out(dir.file("short.ftrk"), std::ios::binary);
    out << "ftrk 1 p=4 grid=2x2 id=tiny label=1\n1 2 3 4\n\n";
    out << "ftrk 1 p=4 grid=2x2 id=okay label=0\n1 2 3 4\n5 6 7 8\n";
    out.close();
    const int code = run("classify --model " + dir.file("m.kcm") + " --test " +
                             dir.file("short.ftrk") + " --out " + dir.file("r.csv"),
                         dir.file("log.txt"));
    CHECK(code == 0);
    const std::string log = slurp(dir.file("log.txt"));
    CHECK(log.find("tiny") != std::string::npos);
    const auto rows = kroncov::read_results_csv(dir.file("r.csv"));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].track_id == "okay");
  }

  SUBCASE("empty test file gives a header-only CSV") {
    std::ofstream(dir.file("empty.ftrk"), std::ios::binary).close();
    CHECK(run("classify --model " + dir.file("m.kcm") + " --test " + dir.file("empty.ftrk") +
              " --out " + dir.file("r.csv")) == 0);
    CHECK(slurp(dir.file("r.csv")) == "track_id,true_label,predicted_label,score\n");
  }
}

TEST_CASE("eval requires truth and matches a hand-counted fixture") {
  TempDir dir;
  SUBCASE("all rows missing truth") {
    std::ofstream out(dir.file("r.csv"), std::ios::binary);
    out << "track_id,true_label,predicted_label,score\nx,,1,0.5\n";
    out.close();
    CHECK(run("eval --results " + dir.file("r.csv")) == 2);
  }
  SUBCASE("ten-row fixture") {
    std::ofstream out(dir.file("r.csv"), std::ios::binary);
    out << "track_id,true_label,predicted_label,score\n";
    // 7 correct, 3 wrong by hand
    const int truth[10] = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    const int pred[10] = {0, 0, 0, 1, 1, 1, 1, 1, 1, 0};
    for (int i = 0; i < 10; ++i) {
      out << "t" << i << ',' << truth[i] << ',' << pred[i] << ",0.1\n";
    }
    out.close();
    REQUIRE(run("eval --results " + dir.file("r.csv"), dir.file("out.txt")) == 0);
    const std::string text = slurp(dir.file("out.txt"));
    CHECK(text.find("accuracy=0.7\n") != std::string::npos);
    CHECK(text.find("class0_accuracy=0.6") != std::string::npos);
    CHECK(text.find("class1_accuracy=0.8") != std::string::npos);
    CHECK(text.find("true0_pred1=2") != std::string::npos);
  }
}

TEST_CASE("sweep writes a reproducible plot-ready CSV") {
  TempDir dir;
  const std::string args =
      "sweep --grid 2x2 --T 2 --n-list 16 --T-list 1,2 --trials 2 --test-tracks 16 "
      "--frames 4 --levels 2 --seed 12 --out ";
  REQUIRE(run(args + dir.file("s1.csv"), dir.file("log1.txt")) == 0);
  REQUIRE(run(args + dir.file("s2.csv"), dir.file("log2.txt")) == 0);
  const std::string csv = slurp(dir.file("s1.csv"));
  CHECK(csv == slurp(dir.file("s2.csv")));
  CHECK(csv.rfind("method,T,n,trial,accuracy\n", 0) == 0);
  // 2 methods x 2 windows x 1 size x 2 trials = 8 data rows
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);
  CHECK(csv.find("logistic-llr,1,16,0,") != std::string::npos);
  CHECK(csv.find("overall-llr,2,16,1,") != std::string::npos);
}

TEST_CASE("inspect summarizes a trained classifier") {
  TempDir dir;
  const std::string d = dir.file("d");
  REQUIRE(run("simulate --out " + d +
              " --grid 2x2 --T 2 --train-tracks 30 --test-tracks 4 --frames 6 --seed 5") == 0);
  REQUIRE(run("fit --train " + d + "/train.ftrk --model " + dir.file("m.kcm") +
              " --T 2 --levels 2") == 0);
  REQUIRE(run("inspect --model " + dir.file("m.kcm"), dir.file("out.txt")) == 0);
  const std::string text = slurp(dir.file("out.txt"));
  CHECK(text.find("classifier p=4 T=2") != std::string::npos);
  CHECK(text.find("blocks=3") != std::string::npos);
  CHECK(text.find("rank=") != std::string::npos);
  CHECK(text.find("rho=") != std::string::npos);
  CHECK(text.find("eigenvalues min=") != std::string::npos);
}
