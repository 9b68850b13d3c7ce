// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "okdmd/baselines.hpp"
#include "okdmd/okdmd_core.hpp"
#include "okdmd/synthgen.hpp"

namespace okdmd::harness {

enum class Method { okdmd, kdmd, lowrank };

Method parse_method(std::string_view name);
std::string method_name(Method m);

struct ExperimentConfig {
  std::filesystem::path dataset_dir; // empty when generating in-process
  bool generate = false;
  synthgen::GridSpec grid;
  synthgen::GenConfig gen;

  std::vector<Method> methods;
  std::vector<kernels::KernelSpec> kernel_list;
  std::vector<Index> ranks;
  core::InverseMode inverse_mode = core::InverseMode::closed_form;
  double rank_tol = core::kDefaultRankTol;

  std::filesystem::path out_dir; // when set, sweep writes sweep.csv there
  bool plot = false;
  bool wall_timings = false; // defaults to zeroed timings so CSV bytes are reproducible

  void validate() const;
};

struct ExperimentRow {
  Method method = Method::okdmd;
  kernels::KernelSpec kernel;
  Index k = 0;
  double eps_train = 0.0;
  double eps_test = 0.0;
  double fit_seconds = 0.0;
  double preimage_convergence_rate = 0.0;
  std::string status = "ok";
};

struct ExperimentTable {
  std::vector<ExperimentRow> rows;
};

/// Normalized error: sqrt(sum_j |pred_j - truth_j|^2 / sum_j |truth_j|^2).
double epsilon(const Mat& predictions, const Mat& truth);

/// Predictions for every snapshot pair of a set, one column per Y column,
/// advanced from each trajectory's initial condition.
struct SetPredictions {
  Mat values;
  Index converged = 0;
  Index total = 0;
};

ExperimentTable sweep(const ExperimentConfig& cfg);

std::string to_csv(const ExperimentTable& table);

void write_svg_plots(const std::filesystem::path& out_dir, const ExperimentTable& table);

/// Numerical verification of the eigen-decomposition identities and the
/// prediction equivalence between the Gram-only pipeline and the operator
/// assembled in explicit feature coordinates. Requires an explicit feature
/// map of dimension <= 1e4.
struct OracleReport {
  Index k = 0;
  Index k_eff = 0;
  std::uint64_t feature_dim = 0;
  double left_residual = 0.0;
  double right_residual = 0.0;
  double prediction_residual = 0.0;
  /// Gap to the unconstrained least-squares pipeline; only meaningful at
  /// k = m with a full-rank X Gram, -1 otherwise.
  double unconstrained_residual = -1.0;
};

OracleReport oracle_check(const core::SnapshotSet& train, const kernels::KernelSpec& kernel,
                          Index k, double rank_tol = core::kDefaultRankTol);

std::string format_report(const OracleReport& report);

} // namespace okdmd::harness
