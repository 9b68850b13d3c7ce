// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "okdmd/okdmd_core.hpp"

namespace okdmd::baselines {

/// K-DMD model: eigen-decomposition of the unconstrained least-squares
/// operator plus least-squares eigen-modes. All m eigen-pairs are kept;
/// truncation to k happens at prediction time.
struct KdmdModel {
  CVec lambda; // m eigenvalues, non-increasing modulus
  CMat Xi;     // m x m small eigen-vectors
  Mat R;       // Sigma_X^+ V_X^T
  CMat modes;  // p x m eigen-mode estimates mu_hat
  core::GramCache gram;
  Mat X_train;
  Mat Y_train;
  double rank_tol = core::kDefaultRankTol;
  kernels::KernelSpec kernel;
  bool gxx_rank_deficient = false; // the method assumes a full-rank X Gram

  Index ambient_dim() const { return X_train.rows(); }
  Index pair_count() const { return X_train.cols(); }
};

KdmdModel kdmd_fit(const core::SnapshotSet& snapshots, const kernels::KernelSpec& kernel,
                   double rank_tol = core::kDefaultRankTol);

/// Truncated eigen-mode sum over the k largest-modulus eigenvalues.
core::Prediction kdmd_predict(const KdmdModel& model, const Vec& theta, int t, Index k);

/// Low-rank DMD is the linear-kernel special case of the optimal pipeline;
/// its inverse (Y g) is exact.
core::ReducedModel lowrank_dmd_fit(const core::SnapshotSet& snapshots, Index k,
                                   double rank_tol = core::kDefaultRankTol);

void save_kdmd_model(const std::filesystem::path& dir, const KdmdModel& model);
KdmdModel load_kdmd_model(const std::filesystem::path& dir);

} // namespace okdmd::baselines
