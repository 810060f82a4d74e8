#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dlfpca/csv.hpp"
#include "dlfpca/simulation.hpp"

using namespace dlfpca;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dlfpca_test_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DLFPCA_CLI_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  return std::system(cmd.c_str());
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("ingest groups and sorts a two-row file") {
  TempDir dir;
  const std::string path = dir.file("tiny.csv");
  write_file(path,
             "subject_id,time,value,censored\n"
             "p1,0.8,2.5,0\n"
             "p1,0.2,1.5,0\n");
  const Dataset data = ingest_csv(path);
  REQUIRE(data.n_subjects() == 1);
  CHECK(data.trajectories[0].size() == 2);
  CHECK(data.trajectories[0].times[0] == 0.2);  // sorted within subject
  CHECK(data.trajectories[0].values[0] == 1.5);
  CHECK(data.domain_lo == 0.2);
  CHECK(data.domain_hi == 0.8);
  CHECK_FALSE(data.detection_limit.has_value());
}

TEST_CASE("ingest errors carry line numbers") {
  TempDir dir;
  const std::string path = dir.file("bad.csv");
  write_file(path,
             "subject_id,time,value,censored\n"
             "p1,not_a_number,1.5,0\n");
  CHECK_THROWS_WITH_AS(ingest_csv(path), doctest::Contains("line 2"),
                       std::runtime_error);

  write_file(path,
             "subject_id,time,value,censored\n"
             "p1,0.2,1.5,0\n"
             "p1,0.3,1.5\n");
  CHECK_THROWS_WITH_AS(ingest_csv(path), doctest::Contains("line 3"),
                       std::runtime_error);

  write_file(path,
             "subject_id,time,value,censored\n"
             "p1,0.2,1.5,2\n");
  CHECK_THROWS_WITH_AS(ingest_csv(path), doctest::Contains("censored"),
                       std::runtime_error);

  write_file(path, "");
  CHECK_THROWS_AS(ingest_csv(path), std::runtime_error);

  write_file(path, "subject_id,time,value,censored\n");
  CHECK_THROWS_WITH_AS(ingest_csv(path), doctest::Contains("no data rows"),
                       std::runtime_error);

  write_file(path, "wrong,header,entirely,here\n");
  CHECK_THROWS_WITH_AS(ingest_csv(path), doctest::Contains("header"),
                       std::runtime_error);
}

TEST_CASE("ingest validates censored values against the detection limit") {
  TempDir dir;
  const std::string path = dir.file("cens.csv");
  write_file(path,
             "subject_id,time,value,censored\n"
             "p1,0.2,0.5,1\n"
             "p1,0.6,1.5,0\n");
  // Explicit limit disagrees with the recorded censored value.
  CHECK_THROWS_AS(ingest_csv(path, 0.0), std::invalid_argument);
  // Without a limit the censored value itself is the inferred limit.
  const Dataset data = ingest_csv(path);
  CHECK(data.detection_limit == 0.5);

  // Two censored rows with different recorded values cannot both match.
  write_file(path,
             "subject_id,time,value,censored\n"
             "p1,0.2,0.5,1\n"
             "p1,0.6,0.7,1\n");
  CHECK_THROWS_AS(ingest_csv(path), std::invalid_argument);
}

TEST_CASE("export then ingest round-trips the dataset") {
  SimConfig config;
  config.n = 15;
  config.seed = 77;
  Dataset data = apply_detection_limit(generate_dataset(config, 0).data, -0.5);
  // Ingest defines the domain as the observed range, so compare after one
  // bounce through the file format.
  TempDir dir;
  const std::string first = dir.file("first.csv");
  export_dataset_csv(data, first);
  const Dataset bounced = ingest_csv(first);
  const std::string second = dir.file("second.csv");
  export_dataset_csv(bounced, second);
  CHECK(read_file(first) == read_file(second));

  const Dataset again = ingest_csv(second);
  REQUIRE(again.n_subjects() == bounced.n_subjects());
  CHECK(again.detection_limit == bounced.detection_limit);
  for (std::size_t i = 0; i < again.n_subjects(); ++i) {
    CHECK(again.trajectories[i].subject_id ==
          bounced.trajectories[i].subject_id);
    CHECK(again.trajectories[i].times == bounced.trajectories[i].times);
    CHECK(again.trajectories[i].values == bounced.trajectories[i].values);
    CHECK(again.trajectories[i].censored == bounced.trajectories[i].censored);
  }
}

TEST_CASE("format_double round-trips doubles exactly") {
  for (const double v : {1.0 / 3.0, 0.1, -2.5e-300, 6.02214076e23,
                         -0.49999999999999994, 1e-17, 0.0}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
}

TEST_CASE("cli export-grid writes a parseable grid") {
  TempDir dir;
  const std::string out = dir.file("grid.csv");
  REQUIRE(run_cli("export-grid --a 0 --b 2 --grid-size 5 --out " + out) == 0);
  std::ifstream in(out);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,quad_weight");
  double sum = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    double t, w;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf", &t, &w) == 2);
    sum += w;
    ++rows;
  }
  CHECK(rows == 5);
  CHECK(sum == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("cli simulate is byte-deterministic and fit runs end to end") {
  TempDir dir;
  const std::string a = dir.file("a.csv"), b = dir.file("b.csv");
  REQUIRE(run_cli("simulate --n 12 --dl 0 --seed 9 --out " + a) == 0);
  REQUIRE(run_cli("simulate --n 12 --dl 0 --seed 9 --out " + b) == 0);
  CHECK(read_file(a) == read_file(b));

  const std::string out = (dir.path / "fit").string();
  REQUIRE(run_cli("fit --input " + a + " --out " + out +
                  " --grid-size 30 --bias-replicates 100 --seed 4") == 0);
  for (const char* name : {"mean.csv", "covariance.csv", "eigen.csv",
                           "scores.csv", "report.txt"}) {
    CHECK(fs::exists(fs::path(out) / name));
  }
}

TEST_CASE("cli fit fails cleanly and removes partial outputs") {
  TempDir dir;
  const std::string bad = dir.file("bad.csv");
  write_file(bad, "subject_id,time,value,censored\np1,0.5,1.0,0\np1,0.6,1.2,0\n");
  const std::string out = (dir.path / "fitbad").string();
  // One subject with two observations cannot support the sigma fit; expect
  // failure and no leftover partial files.
  CHECK(run_cli("fit --input " + bad + " --out " + out) != 0);
  CHECK_FALSE(fs::exists(fs::path(out) / "mean.csv"));
  CHECK_FALSE(fs::exists(fs::path(out) / "report.txt"));
}

TEST_CASE("cli scores consumes fit outputs") {
  TempDir dir;
  const std::string data = dir.file("data.csv");
  REQUIRE(run_cli("simulate --n 15 --dl 0 --seed 21 --out " + data) == 0);
  const std::string out = (dir.path / "fit").string();
  // Default FVE over-selects components for n = 15 noisy subjects and the
  // score stage refuses ill-conditioned systems; that refusal is also
  // checked here before retrying with one component.
  REQUIRE(run_cli("fit --input " + data + " --out " + out +
                  " --grid-size 30 --bias none --seed 4") != 0);
  CHECK_FALSE(fs::exists(fs::path(out) / "report.txt"));
  REQUIRE(run_cli("fit --input " + data + " --out " + out +
                  " --grid-size 30 --bias none --seed 4 --components 1") == 0);
  const std::string scores_out = dir.file("rescored.csv");
  REQUIRE(run_cli("scores --input " + data + " --eigen " + out +
                  "/eigen.csv --sigma 1 --dl 0 --out " + scores_out) == 0);
  std::ifstream in(scores_out);
  std::string header;
  std::getline(in, header);
  CHECK(header == "subject_id,component,score,condition");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows >= 15);
}

}  // TEST_SUITE
