// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset generation, model fitting, prediction,
// error-vs-rank sweeps and explicit-coordinate oracle checks.
//
// Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "okdmd/errors.hpp"
#include "okdmd/harness.hpp"
#include "okdmd/matrix_io.hpp"

namespace {

using namespace okdmd;

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    if (comma == std::string::npos) {
      if (start < csv.size()) out.push_back(csv.substr(start));
      break;
    }
    if (comma > start) out.push_back(csv.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

core::InverseMode parse_inverse(const std::string& name) {
  if (name == "variational") return core::InverseMode::variational;
  if (name == "closed") return core::InverseMode::closed_form;
  throw ConfigError("unknown inverse mode '" + name + "' (expected variational|closed)");
}

int run(int argc, char** argv) {
  CLI::App app{"Kernel-based low-rank reduced modeling of dynamical systems"};
  app.require_subcommand(1);

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Generate a synthetic snapshot dataset");
  synthgen::GridSpec grid;
  synthgen::GenConfig gen;
  std::string gen_out;
  gen_cmd->add_option("--n", grid.n, "grid side (state dimension is 2 n^2)");
  gen_cmd->add_option("--N", gen.N, "trajectory count per set");
  gen_cmd->add_option("--T", gen.T, "trajectory length");
  gen_cmd->add_option("--alpha", gen.alpha, "diffusion coefficient");
  gen_cmd->add_option("--hurst", gen.hurst, "spectral exponent of initial fields");
  gen_cmd->add_option("--noise", gen.noise_std, "white noise std on initial states");
  gen_cmd->add_option("--scale", gen.target_scale, "target median |x_2|");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--modes", gen.modes, "restrict initial conditions to this many basis fields");
  gen_cmd->add_option("--out", gen_out, "output directory")->required();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a reduced model on a dataset");
  std::string fit_data, fit_method = "okdmd", fit_kernel = "log", fit_out;
  long fit_k = 0;
  double fit_rank_tol = core::kDefaultRankTol;
  fit_cmd->add_option("--data", fit_data, "dataset directory")->required();
  fit_cmd->add_option("--method", fit_method, "okdmd|kdmd|lowrank");
  fit_cmd->add_option("--kernel", fit_kernel, "poly:GAMMA|gauss:SIGMA|log|linear");
  fit_cmd->add_option("--k", fit_k, "reduced rank")->required();
  fit_cmd->add_option("--rank-tol", fit_rank_tol, "relative rank threshold");
  fit_cmd->add_option("--out", fit_out, "model output directory")->required();

  // predict
  auto* pred_cmd = app.add_subcommand("predict", "Predict a state from a fitted model");
  std::string pred_model, pred_theta, pred_out, pred_inverse = "closed";
  int pred_t = 2;
  long pred_k = 0;
  pred_cmd->add_option("--model", pred_model, "model directory")->required();
  pred_cmd->add_option("--theta", pred_theta, "initial condition file (p x 1 matrix)")->required();
  pred_cmd->add_option("--t", pred_t, "time index (>= 1)");
  pred_cmd->add_option("--inverse", pred_inverse, "variational|closed");
  pred_cmd->add_option("--k", pred_k, "truncation rank (kdmd models only)");
  pred_cmd->add_option("--out", pred_out, "output file")->required();

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Error-vs-rank study over methods and kernels");
  std::string sweep_data, sweep_methods = "okdmd,kdmd,lowrank", sweep_kernels = "log",
              sweep_ranks, sweep_out, sweep_inverse = "closed";
  double sweep_rank_tol = core::kDefaultRankTol;
  bool sweep_plot = false, sweep_timings = false;
  sweep_cmd->add_option("--data", sweep_data, "dataset directory")->required();
  sweep_cmd->add_option("--methods", sweep_methods, "comma-separated method list");
  sweep_cmd->add_option("--kernels", sweep_kernels, "comma-separated kernel designations");
  sweep_cmd->add_option("--ranks", sweep_ranks, "comma-separated k values")->required();
  sweep_cmd->add_option("--inverse", sweep_inverse, "variational|closed");
  sweep_cmd->add_option("--rank-tol", sweep_rank_tol, "relative rank threshold");
  sweep_cmd->add_option("--out", sweep_out, "output directory")->required();
  sweep_cmd->add_flag("--plot", sweep_plot, "emit SVG plots next to the CSV");
  sweep_cmd->add_flag("--timings", sweep_timings,
                      "record wall-clock fit times (makes the CSV non-reproducible)");

  // oracle-check
  auto* oracle_cmd = app.add_subcommand("oracle-check",
                                        "Verify the pipeline against explicit feature coordinates");
  std::string oracle_data, oracle_kernel = "log";
  long oracle_k = 0;
  double oracle_rank_tol = core::kDefaultRankTol;
  oracle_cmd->add_option("--data", oracle_data, "dataset directory")->required();
  oracle_cmd->add_option("--kernel", oracle_kernel, "kernel designation (explicit map required)");
  oracle_cmd->add_option("--k", oracle_k, "reduced rank")->required();
  oracle_cmd->add_option("--rank-tol", oracle_rank_tol, "relative rank threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen_cmd->parsed()) {
    auto [train, test] = synthgen::generate_dataset(grid, gen);
    synthgen::write_dataset(gen_out, train, test, synthgen::make_meta(grid, gen));
    std::cout << "wrote dataset (p=" << train.ambient_dim() << ", m=" << train.pair_count()
              << ") to " << gen_out << '\n';
    return 0;
  }

  if (fit_cmd->parsed()) {
    synthgen::Dataset ds = synthgen::load_dataset(fit_data);
    const harness::Method method = harness::parse_method(fit_method);
    const kernels::KernelSpec kernel = kernels::KernelSpec::parse(fit_kernel);
    if (method == harness::Method::kdmd) {
      baselines::save_kdmd_model(fit_out, baselines::kdmd_fit(ds.train, kernel, fit_rank_tol));
    } else if (method == harness::Method::lowrank) {
      core::save_model(fit_out, baselines::lowrank_dmd_fit(ds.train, fit_k, fit_rank_tol),
                       "lowrank");
    } else {
      core::save_model(fit_out, core::fit(ds.train, kernel, fit_k, fit_rank_tol), "okdmd");
    }
    std::cout << "wrote model to " << fit_out << '\n';
    return 0;
  }

  if (pred_cmd->parsed()) {
    const Mat theta_mat = linalg::load_real_matrix(pred_theta);
    if (theta_mat.cols() != 1) throw ConfigError("predict: theta file must hold a column vector");
    const Vec theta = theta_mat.col(0);
    const core::MetaMap meta = core::load_meta(std::filesystem::path(pred_model) / "model.meta");
    core::Prediction prediction;
    if (meta.count("method") && meta.at("method") == "kdmd") {
      const baselines::KdmdModel model = baselines::load_kdmd_model(pred_model);
      const long k = pred_k > 0 ? pred_k : model.pair_count();
      prediction = baselines::kdmd_predict(model, theta, pred_t, k);
    } else {
      const core::ReducedModel model = core::load_model(pred_model);
      prediction = core::predict(model, theta, pred_t, parse_inverse(pred_inverse));
    }
    linalg::save_matrix(pred_out, Mat(prediction.state));
    if (prediction.conjugacy_warning) {
      std::cerr << "warning: conjugate-pair cancellation residual " << prediction.imag_residual
                << '\n';
    }
    std::cout << "wrote prediction to " << pred_out << '\n';
    return 0;
  }

  if (sweep_cmd->parsed()) {
    harness::ExperimentConfig cfg;
    cfg.dataset_dir = sweep_data;
    for (const std::string& s : split_list(sweep_methods)) cfg.methods.push_back(harness::parse_method(s));
    for (const std::string& s : split_list(sweep_kernels)) cfg.kernel_list.push_back(kernels::KernelSpec::parse(s));
    for (const std::string& s : split_list(sweep_ranks)) cfg.ranks.push_back(std::stol(s));
    cfg.inverse_mode = parse_inverse(sweep_inverse);
    cfg.rank_tol = sweep_rank_tol;
    cfg.out_dir = sweep_out;
    cfg.plot = sweep_plot;
    cfg.wall_timings = sweep_timings;
    const harness::ExperimentTable table = harness::sweep(cfg);
    std::cout << "wrote " << table.rows.size() << " rows to " << sweep_out << "/sweep.csv\n";
    return 0;
  }

  if (oracle_cmd->parsed()) {
    synthgen::Dataset ds = synthgen::load_dataset(oracle_data);
    const harness::OracleReport report = harness::oracle_check(
        ds.train, kernels::KernelSpec::parse(oracle_kernel), oracle_k, oracle_rank_tol);
    std::cout << harness::format_report(report);
    return 0;
  }

  return 2;
}

} // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const KernelDomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const CapabilityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    // numerical failures, degenerate pairs, overflow, generation
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
