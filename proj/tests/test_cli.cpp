// Drives the CLI binary (path in $MATINFO_CLI) end to end: exit codes,
// reproducibility, and cross-command consistency.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "core/io.hpp"
#include "core/measures.hpp"
#include "core/rng.hpp"

namespace fs = std::filesystem;
using namespace matinfo;

namespace {

std::string cli_path() {
  const char* p = std::getenv("MATINFO_CLI");
  REQUIRE(p != nullptr);
  return p;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0)
    r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("matinfo_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

// Extracts "name":...,"value":<v> pairs from a measure report.
std::vector<std::pair<std::string, double>> report_values(const std::string& json) {
  std::vector<std::pair<std::string, double>> out;
  std::size_t pos = 0;
  while ((pos = json.find("{\"name\":\"", pos)) != std::string::npos) {
    const std::size_t name_start = pos + 9;
    const std::size_t name_end = json.find('"', name_start);
    const std::size_t value_pos = json.find("\"value\":", name_end);
    const std::size_t value_end = json.find('}', value_pos);
    out.emplace_back(json.substr(name_start, name_end - name_start),
                     std::stod(json.substr(value_pos + 8,
                                           value_end - value_pos - 8)));
    pos = value_end;
  }
  return out;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run_cli("no-such-command").exit_code == 1);
  CHECK(run_cli("train --loss nonsense --steps 1").exit_code == 1);
}

TEST_CASE("measure on decorrelated data reports ln d") {
  TempDir tmp;
  const fs::path csv = tmp.path / "a.csv";
  Eigen::MatrixXd z(2, 4);
  z << 1, -1, 1, -1, 1, 1, -1, -1;
  write_csv_matrix(csv.string(), z);

  const RunResult r = run_cli("measure --kernel covariance --alpha 1 " +
                              csv.string());
  REQUIRE(r.exit_code == 0);
  const auto values = report_values(r.out);
  bool found = false;
  for (const auto& [name, value] : values) {
    if (name == "von_neumann_entropy") {
      CHECK(value == doctest::Approx(std::log(2.0)).epsilon(1e-9));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("measure report values equal direct library calls") {
  TempDir tmp;
  Rng rng(99);
  Eigen::MatrixXd z1(4, 12), z2(4, 12);
  for (Eigen::Index j = 0; j < 12; ++j)
    for (Eigen::Index i = 0; i < 4; ++i) {
      z1(i, j) = rng.normal();
      z2(i, j) = rng.normal();
    }
  const fs::path a = tmp.path / "a.csv";
  const fs::path b = tmp.path / "b.csv";
  write_csv_matrix(a.string(), z1);
  write_csv_matrix(b.string(), z2);

  const RunResult r = run_cli("measure --alpha 1,2 --mu 1 " +
                              a.string() + " " + b.string());
  REQUIRE(r.exit_code == 0);

  // recompute through the library on the round-tripped files
  const FeatureMatrix f1 = load_feature_csv(a.string());
  const FeatureMatrix f2 = load_feature_csv(b.string());
  const KernelMatrix k1 = covariance_kernel(f1);
  const KernelMatrix k2 = covariance_kernel(f2);

  // the report carries 12 significant digits; the CLI must print exactly the
  // library value, so compare the rendered strings
  const double expect_mi = mutual_information(k1, k2, 1.0).value;
  const double expect_js = matrix_js(k1, k2).value;
  CHECK(r.out.find("{\"name\":\"mutual_information\",\"alpha\":1,\"value\":" +
                   format_double(expect_mi) + "}") != std::string::npos);
  CHECK(r.out.find("{\"name\":\"matrix_js\",\"value\":" +
                   format_double(expect_js) + "}") != std::string::npos);
  CHECK(expect_mi <= std::log(4.0) + 1e-7);
}

TEST_CASE("measure on a missing file exits 2") {
  CHECK(run_cli("measure /nonexistent/path.csv").exit_code == 2);
}

TEST_CASE("train writes a run directory and is byte-reproducible") {
  TempDir tmp;
  const std::string flags =
      "train --loss barlow --d 4 --batch 16 --n-samples 16 --patch-count 4 "
      "--steps 8 --record-every 4 --seed 5 --out ";
  const fs::path run1 = tmp.path / "r1";
  const fs::path run2 = tmp.path / "r2";
  REQUIRE(run_cli(flags + run1.string()).exit_code == 0);
  REQUIRE(run_cli(flags + run2.string()).exit_code == 0);

  const std::string traj1 = slurp(run1 / "trajectory.jsonl");
  CHECK(!traj1.empty());
  CHECK(traj1 == slurp(run2 / "trajectory.jsonl"));
  CHECK(slurp(run1 / "summary.json") == slurp(run2 / "summary.json"));
  CHECK(fs::exists(run1 / "manifest.json"));

  // 8 steps, record every 4 plus the initialization record
  CHECK(std::count(traj1.begin(), traj1.end(), '\n') == 3);
}

TEST_CASE("train with zero steps emits a single record") {
  TempDir tmp;
  const fs::path run = tmp.path / "r0";
  const RunResult r = run_cli(
      "train --loss spectral --d 4 --batch 16 --n-samples 16 --patch-count 4 "
      "--steps 0 --seed 2 --out " + run.string());
  REQUIRE(r.exit_code == 0);
  const std::string traj = slurp(run / "trajectory.jsonl");
  CHECK(std::count(traj.begin(), traj.end(), '\n') == 1);
  CHECK(traj.find("\"step\":0") != std::string::npos);
}

TEST_CASE("diverged masked run exits 3 and keeps the last valid record") {
  TempDir tmp;
  const fs::path run = tmp.path / "diverged";
  const RunResult r = run_cli(
      "train --loss mae --d 4 --batch 16 --n-samples 16 --patch-count 4 "
      "--steps 50 --lr 1e18 --seed 2 --out " + run.string());
  CHECK(r.exit_code == 3);
  CHECK(!slurp(run / "trajectory.jsonl").empty());
}

TEST_CASE("trajectory command matches measure per checkpoint and sorts steps") {
  TempDir tmp;
  // craft a single-branch run directory with out-of-order step files
  Rng rng(7);
  auto random_features = [&rng]() {
    Eigen::MatrixXd z(3, 10);
    for (Eigen::Index j = 0; j < 10; ++j)
      for (Eigen::Index i = 0; i < 3; ++i) z(i, j) = rng.normal();
    return z;
  };
  const Eigen::MatrixXd z10 = random_features();
  const Eigen::MatrixXd z2 = random_features();
  write_csv_matrix((tmp.path / "step_10.csv").string(), z10);
  write_csv_matrix((tmp.path / "step_2.csv").string(), z2);

  const RunResult r = run_cli("trajectory --alpha 1 --mu 1 " + tmp.path.string());
  REQUIRE(r.exit_code == 0);
  const std::size_t pos2 = r.out.find("\n2\t");
  const std::size_t pos10 = r.out.find("\n10\t");
  REQUIRE(pos2 != std::string::npos);
  REQUIRE(pos10 != std::string::npos);
  CHECK(pos2 < pos10);

  // values equal a direct measure computation on the checkpoint
  const KernelMatrix k =
      covariance_kernel(load_feature_csv((tmp.path / "step_2.csv").string()));
  const std::string want = format_double(von_neumann_entropy(k).value);
  CHECK(r.out.find("2\tvon_neumann_entropy\t" + want) != std::string::npos);
}

TEST_CASE("trajectory on an empty directory exits 2") {
  TempDir tmp;
  CHECK(run_cli("trajectory " + tmp.path.string()).exit_code == 2);
}

TEST_CASE("trajectory scans a masked run's single branch directory") {
  TempDir tmp;
  const fs::path run = tmp.path / "masked";
  REQUIRE(run_cli("train --loss mmae --d 4 --batch 16 --n-samples 16 "
                  "--patch-count 4 --steps 6 --record-every 3 --seed 8 --out " +
                  run.string())
              .exit_code == 0);
  REQUIRE(fs::exists(run / "branch1" / "step_0.csv"));
  CHECK_FALSE(fs::exists(run / "branch2"));
  const RunResult r = run_cli("trajectory " + run.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("von_neumann_entropy") != std::string::npos);
  CHECK(r.out.find("\n6\t") != std::string::npos);
}

TEST_CASE("verify subcommand is reproducible and passes") {
  const RunResult a = run_cli("verify --trials 5 --n 2,4 --seed 3 --json");
  REQUIRE(a.exit_code == 0);
  CHECK(a.out.find("\"pass\":true") != std::string::npos);
  const RunResult b = run_cli("verify --trials 5 --n 2,4 --seed 3 --json");
  CHECK(a.out == b.out);

  const RunResult text = run_cli("verify --trials 2 --n 2 --seed 3");
  CHECK(text.exit_code == 0);
  CHECK(text.out.find("PASS") != std::string::npos);
}

TEST_CASE("sweep emits the mu table") {
  TempDir tmp;
  const RunResult r = run_cli(
      "sweep --loss mmae --d 4 --batch 16 --n-samples 16 --patch-count 4 "
      "--steps 4 --seed 6 --mu-list 0.5,1 --out " +
      (tmp.path / "sweep").string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.rfind("mu\tfinal_recon", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
  CHECK(fs::exists(tmp.path / "sweep" / "mu_sweep.tsv"));
}

TEST_CASE("mismatched feature files exit 2") {
  TempDir tmp;
  Eigen::MatrixXd z1(2, 6), z2(3, 6);
  Rng rng(12);
  for (Eigen::Index j = 0; j < 6; ++j) {
    for (Eigen::Index i = 0; i < 2; ++i) z1(i, j) = rng.normal();
    for (Eigen::Index i = 0; i < 3; ++i) z2(i, j) = rng.normal();
  }
  const fs::path a = tmp.path / "a.csv";
  const fs::path b = tmp.path / "b.csv";
  write_csv_matrix(a.string(), z1);
  write_csv_matrix(b.string(), z2);
  CHECK(run_cli("measure " + a.string() + " " + b.string()).exit_code == 2);
}

TEST_CASE("gram kernel switch") {
  TempDir tmp;
  const fs::path csv = tmp.path / "a.csv";
  write_csv_matrix(csv.string(), Eigen::MatrixXd::Identity(4, 4));
  const RunResult r = run_cli("measure --kernel gram --alpha 1 " + csv.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("\"kernel\":\"gram\"") != std::string::npos);
  const auto values = report_values(r.out);
  bool found = false;
  for (const auto& [name, value] : values)
    if (name == "von_neumann_entropy") {
      CHECK(value == doctest::Approx(std::log(4.0)).epsilon(1e-9));
      found = true;
    }
  CHECK(found);
}

TEST_CASE("default output root honors the environment variable") {
  TempDir tmp;
  const std::string cmd =
      "MATINFO_OUTPUT_ROOT=" + tmp.path.string() + " " + cli_path() +
      " train --loss barlow --d 4 --batch 16 --n-samples 16 --patch-count 4"
      " --steps 2 --seed 4 > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(tmp.path / "train-seed4" / "trajectory.jsonl"));
  CHECK(fs::exists(tmp.path / "train-seed4" / "manifest.json"));
}

TEST_CASE("config file drives training") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "run.cfg";
  {
    std::ofstream out(cfg);
    out << "loss = barlow\nfeature_dim = 4\nbatch_size = 16\n"
        << "n_samples = 16\npatch_count = 4\nsteps = 4\nseed = 9\n";
  }
  const fs::path run = tmp.path / "from_config";
  REQUIRE(run_cli("train --config " + cfg.string() + " --out " + run.string())
              .exit_code == 0);
  CHECK(fs::exists(run / "trajectory.jsonl"));

  // flag overrides win over the file
  const fs::path run2 = tmp.path / "override";
  REQUIRE(run_cli("train --config " + cfg.string() + " --steps 0 --out " +
                  run2.string())
              .exit_code == 0);
  const std::string traj = slurp(run2 / "trajectory.jsonl");
  CHECK(std::count(traj.begin(), traj.end(), '\n') == 1);
}
