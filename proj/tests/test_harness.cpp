// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "okdmd/errors.hpp"
#include "okdmd/harness.hpp"
#include "okdmd/matrix_io.hpp"
#include "support/oracle_utils.hpp"
#include "support/test_utils.hpp"

using namespace okdmd;
using namespace okdmd::harness;
using kernels::KernelSpec;
using testutil::random_matrix;

namespace {

std::string slurp(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  REQUIRE(is);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

// Small deterministic desk dataset shared by the sweep tests.
void write_desk_dataset(const std::filesystem::path& dir, int n = 4, int N = 8, int modes = 0,
                        std::uint64_t seed = 31) {
  synthgen::GridSpec grid{n};
  synthgen::GenConfig cfg;
  cfg.N = N;
  cfg.seed = seed;
  cfg.modes = modes;
  const auto [train, test] = synthgen::generate_dataset(grid, cfg);
  synthgen::write_dataset(dir, train, test, synthgen::make_meta(grid, cfg));
}

} // namespace

TEST_CASE("epsilon basics") {
  const Mat truth = random_matrix(4, 3, 1u);
  CHECK(epsilon(truth, truth) == 0.0);
  CHECK(epsilon(Mat::Zero(4, 3), truth) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(epsilon(Mat::Zero(4, 3), Mat::Zero(4, 3)), InvalidInputError);
  CHECK_THROWS_AS(epsilon(Mat::Zero(3, 3), truth), InvalidInputError);
}

TEST_CASE("epsilon hand instance: errors (3,4) against norms (5,5)") {
  Mat truth = Mat::Zero(3, 2);
  truth(0, 0) = 5.0;
  truth(1, 1) = 5.0;
  Mat pred = truth;
  pred(2, 0) += 3.0;
  pred(2, 1) += 4.0;
  CHECK(epsilon(pred, truth) == doctest::Approx(std::sqrt(25.0 / 50.0)).epsilon(1e-14));
}

TEST_CASE("epsilon is scale-invariant") {
  const Mat truth = random_matrix(5, 4, 2u);
  const Mat pred = random_matrix(5, 4, 3u);
  const double base = epsilon(pred, truth);
  for (const double c : {2.0, -0.5, 1e-6}) {
    CHECK(epsilon(Mat(c * pred), Mat(c * truth)) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("sweep produces deterministic CSV bytes and sensible rows") {
  testutil::TempDir tmp("harness_sweep");
  write_desk_dataset(tmp.path() / "data");

  ExperimentConfig cfg;
  cfg.dataset_dir = tmp.path() / "data";
  cfg.methods = {Method::okdmd, Method::kdmd, Method::lowrank};
  cfg.kernel_list = {KernelSpec::logarithmic(), KernelSpec::linear()};
  cfg.ranks = {2, 4, 8};
  cfg.out_dir = tmp.path() / "out1";
  const ExperimentTable t1 = sweep(cfg);
  cfg.out_dir = tmp.path() / "out2";
  const ExperimentTable t2 = sweep(cfg);

  CHECK(t1.rows.size() == 3 * 2 * 3);
  const std::string csv1 = slurp(tmp.path() / "out1" / "sweep.csv");
  const std::string csv2 = slurp(tmp.path() / "out2" / "sweep.csv");
  CHECK(csv1 == csv2);
  CHECK(csv1.rfind("method,kernel,k,eps_train,eps_test,fit_seconds,preimage_convergence_rate,status\n",
                   0) == 0);

  // Rows appear in deterministic (method, kernel, k) order.
  CHECK(t1.rows[0].method == Method::okdmd);
  CHECK(t1.rows[0].k == 2);
  CHECK(t1.rows[1].k == 4);
  for (const ExperimentRow& row : t1.rows) {
    CHECK(row.status == "ok");
    CHECK(row.eps_train >= 0.0);
    CHECK(row.fit_seconds == 0.0); // timings default to their deterministic zero
  }
}

TEST_CASE("sweep: training error at k = m vanishes and matches across methods") {
  testutil::TempDir tmp("harness_km");
  write_desk_dataset(tmp.path() / "data");

  ExperimentConfig cfg;
  cfg.dataset_dir = tmp.path() / "data";
  cfg.methods = {Method::okdmd, Method::kdmd};
  cfg.kernel_list = {KernelSpec::logarithmic(), KernelSpec::linear()};
  cfg.ranks = {8}; // = m for this dataset
  const ExperimentTable table = sweep(cfg);
  double ok_log = -1.0, kd_log = -1.0, ok_lin = -1.0, kd_lin = -1.0;
  for (const ExperimentRow& row : table.rows) {
    CHECK(row.eps_train <= 1e-6);
    if (row.kernel.family == kernels::Family::logarithmic) {
      (row.method == Method::okdmd ? ok_log : kd_log) = row.eps_train;
    } else {
      (row.method == Method::okdmd ? ok_lin : kd_lin) = row.eps_train;
    }
  }
  CHECK(std::abs(ok_log - kd_log) <= 1e-6);
  CHECK(std::abs(ok_lin - kd_lin) <= 1e-6);
}

TEST_CASE("training error is non-increasing in k up to 5% jitter (okdmd and lowrank)") {
  testutil::TempDir tmp("harness_mono");
  write_desk_dataset(tmp.path() / "data", 4, 10);

  ExperimentConfig cfg;
  cfg.dataset_dir = tmp.path() / "data";
  cfg.methods = {Method::okdmd, Method::lowrank};
  cfg.kernel_list = {KernelSpec::logarithmic()};
  cfg.ranks = {2, 4, 6, 8, 10};
  const ExperimentTable table = sweep(cfg);
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    if (table.rows[i].method != table.rows[i - 1].method) continue;
    CHECK(table.rows[i].eps_train <= 1.05 * table.rows[i - 1].eps_train + 1e-12);
  }
}

TEST_CASE("sweep records per-cell failures without aborting") {
  testutil::TempDir tmp("harness_fail");
  // Data with entries <= -1: the log kernel must fail, linear must succeed.
  core::SnapshotSet train;
  train.X = random_matrix(4, 5, 9u) * 2.0;
  train.Y = random_matrix(4, 5, 10u) * 2.0;
  train.X(0, 0) = -1.5;
  synthgen::write_dataset(tmp.path() / "data", train, core::SnapshotSet{}, {});

  ExperimentConfig cfg;
  cfg.dataset_dir = tmp.path() / "data";
  cfg.methods = {Method::okdmd};
  cfg.kernel_list = {KernelSpec::logarithmic(), KernelSpec::linear()};
  cfg.ranks = {2};
  const ExperimentTable table = sweep(cfg);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].status == "kernel-domain");
  CHECK(std::isnan(table.rows[0].eps_train));
  CHECK(table.rows[1].status == "ok");
  // NaN cells print deterministically.
  const std::string csv = to_csv(table);
  CHECK(csv.find("nan") != std::string::npos);
}

TEST_CASE("sweep with the variational inverse reports convergence rates") {
  testutil::TempDir tmp("harness_var");
  write_desk_dataset(tmp.path() / "data", 3, 6);

  ExperimentConfig cfg;
  cfg.dataset_dir = tmp.path() / "data";
  cfg.methods = {Method::okdmd};
  cfg.kernel_list = {KernelSpec::gaussian(0.1)};
  cfg.ranks = {6};
  cfg.inverse_mode = core::InverseMode::variational;
  const ExperimentTable table = sweep(cfg);
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].status == "ok");
  CHECK(table.rows[0].preimage_convergence_rate > 0.99);
}

TEST_CASE("svg plots are emitted next to the CSV") {
  testutil::TempDir tmp("harness_svg");
  write_desk_dataset(tmp.path() / "data");
  ExperimentConfig cfg;
  cfg.dataset_dir = tmp.path() / "data";
  cfg.methods = {Method::okdmd};
  cfg.kernel_list = {KernelSpec::logarithmic()};
  cfg.ranks = {2, 4};
  cfg.out_dir = tmp.path() / "out";
  cfg.plot = true;
  sweep(cfg);
  CHECK(std::filesystem::exists(tmp.path() / "out" / "sweep_train.svg"));
  CHECK(std::filesystem::exists(tmp.path() / "out" / "sweep_test.svg"));
  const std::string svg = slurp(tmp.path() / "out" / "sweep_train.svg");
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("oracle_check: linear kernel on linear dynamics") {
  const testutil::LinearDynamics dyn = testutil::linear_dynamics_instance(6, 4, 5, 11u);
  const OracleReport report = oracle_check(dyn.snapshots, KernelSpec::linear(), 4);
  CHECK(report.left_residual <= 1e-10);
  CHECK(report.right_residual <= 1e-10);
  CHECK(report.prediction_residual <= 1e-10);
}

TEST_CASE("oracle_check: log kernel on a generated dataset") {
  synthgen::GridSpec grid{4};
  synthgen::GenConfig gen;
  gen.N = 8;
  gen.seed = 17;
  const auto [train, test] = synthgen::generate_dataset(grid, gen);
  for (const Index k : {Index{2}, Index{4}, Index{8}}) {
    const OracleReport report = oracle_check(train, KernelSpec::logarithmic(), k);
    CHECK(report.left_residual <= 1e-8);
    CHECK(report.right_residual <= 1e-8);
    CHECK(report.prediction_residual <= 1e-8);
    if (k == 8) {
      CHECK(report.unconstrained_residual >= 0.0);
      CHECK(report.unconstrained_residual <= 1e-8);
    }
  }
  const std::string text = format_report(oracle_check(train, KernelSpec::logarithmic(), 8));
  CHECK(text.find("left eigen-identity") != std::string::npos);
  CHECK(text.find("unconstrained") != std::string::npos);
}

TEST_CASE("oracle_check enforces the feature-dimension cap") {
  core::SnapshotSet s;
  s.X = random_matrix(40, 3, 12u);
  s.Y = random_matrix(40, 3, 13u);
  CHECK_THROWS_AS(oracle_check(s, KernelSpec::polynomial(4), 2), CapacityError);
}

TEST_CASE("method names parse and print") {
  CHECK(parse_method("okdmd") == Method::okdmd);
  CHECK(parse_method("kdmd") == Method::kdmd);
  CHECK(parse_method("lowrank") == Method::lowrank);
  CHECK_THROWS_AS(parse_method("dmdx"), ConfigError);
  CHECK(method_name(Method::lowrank) == "lowrank");
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.methods = {Method::okdmd};
  cfg.kernel_list = {KernelSpec::linear()};
  cfg.ranks = {0};
  cfg.dataset_dir = "/nonexistent";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

#ifdef OKDMD_CLI_PATH
namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OKDMD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("cli end-to-end: generate, fit, predict, sweep, oracle-check") {
  testutil::TempDir tmp("cli_e2e");
  const std::string data = (tmp.path() / "data").string();
  CHECK(run_cli("generate --n 4 --N 6 --seed 3 --out " + data) == 0);
  CHECK(std::filesystem::exists(tmp.path() / "data" / "X.mat"));
  CHECK(std::filesystem::exists(tmp.path() / "data" / "gen.meta"));

  const std::string model = (tmp.path() / "model").string();
  CHECK(run_cli("fit --data " + data + " --method okdmd --kernel log --k 4 --out " + model) == 0);
  CHECK(std::filesystem::exists(tmp.path() / "model" / "model.meta"));

  // Use the first training column as theta.
  const Mat x = linalg::load_real_matrix(tmp.path() / "data" / "X.mat");
  linalg::save_matrix(tmp.path() / "theta.mat", Mat(x.col(0)));
  const std::string pred_file = (tmp.path() / "pred.mat").string();
  CHECK(run_cli("predict --model " + model + " --theta " + (tmp.path() / "theta.mat").string() +
                " --t 2 --inverse closed --out " + pred_file) == 0);
  const Mat pred = linalg::load_real_matrix(pred_file);
  const Mat y = linalg::load_real_matrix(tmp.path() / "data" / "Y.mat");
  CHECK(pred.rows() == y.rows());

  CHECK(run_cli("sweep --data " + data + " --methods okdmd,kdmd --kernels log --ranks 2,4 --out " +
                (tmp.path() / "out").string() + " --plot") == 0);
  CHECK(std::filesystem::exists(tmp.path() / "out" / "sweep.csv"));
  CHECK(std::filesystem::exists(tmp.path() / "out" / "sweep_train.svg"));

  CHECK(run_cli("oracle-check --data " + data + " --kernel log --k 2") == 0);
}

TEST_CASE("cli exit codes: invalid config is 2") {
  testutil::TempDir tmp("cli_exit");
  CHECK(run_cli("sweep --ranks 2 --out x") == 2);                       // missing --data
  CHECK(run_cli("fit --data /nonexistent --k 2 --out x") == 2);         // unreadable dataset
  const std::string data = (tmp.path() / "data").string();
  CHECK(run_cli("generate --n 4 --N 4 --seed 1 --out " + data) == 0);
  CHECK(run_cli("fit --data " + data + " --kernel bogus --k 2 --out x") == 2);
}

TEST_CASE("cli exit codes: numerical failure is 3") {
  testutil::TempDir tmp("cli_exit3");
  // Expanding dynamics: |lambda| ~ 3, so a long horizon overflows.
  core::SnapshotSet train;
  train.X = random_matrix(5, 3, 60u);
  train.Y = 3.0 * train.X;
  synthgen::write_dataset(tmp.path() / "data", train, core::SnapshotSet{}, {});
  const std::string model = (tmp.path() / "model").string();
  CHECK(run_cli("fit --data " + (tmp.path() / "data").string() +
                " --method lowrank --k 3 --out " + model) == 0);
  linalg::save_matrix(tmp.path() / "theta.mat", Mat(train.X.col(0)));
  CHECK(run_cli("predict --model " + model + " --theta " + (tmp.path() / "theta.mat").string() +
                " --t 100000 --inverse closed --out " + (tmp.path() / "p.mat").string()) == 3);
}
#endif
