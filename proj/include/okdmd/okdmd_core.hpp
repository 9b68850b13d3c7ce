// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "okdmd/kernels.hpp"
#include "okdmd/preimage.hpp"
#include "okdmd/snapshots.hpp"
#include "okdmd/types.hpp"

namespace okdmd::core {

/// The m x m kernel-trick matrices: the only contact the algorithm has with
/// the feature space.
struct GramCache {
  Mat Gxx; // X^T X in feature space
  Mat Gyy; // Y^T Y
  Mat Gyx; // Y^T X
  kernels::KernelSpec kernel;

  Index pair_count() const { return Gxx.rows(); }
  void validate() const;
};

GramCache build_gram(const SnapshotSet& snapshots, const kernels::KernelSpec& kernel);

/// Z^T Z where Z = Y P_{X^T}: the projected successor Gram of the optimal
/// low-rank problem.
Mat z_gram(const GramCache& g, double rank_tol);

/// The small matrices of the optimal rank-k solution: the left matrix whose
/// right eigen-vectors lift to left eigen-vectors of the optimal operator,
/// its right counterpart, and the auxiliary maps R, C, E.
struct SmallMatrices {
  Mat A_left_star; // R Gyy S Gyx R^T
  Mat A_right;     // C Gyy R^T R Gyx^T C^T
  Mat R;           // Sigma_X^+ V_X^T
  Mat C;
  Mat E;           // normalization pairing, Zeta^T E Xi = I
  Index rank_x = 0;
  Index rank_z = 0;
};

SmallMatrices small_matrices(const GramCache& g, Index k, double rank_tol);

/// Fitted reduced model of requested rank k. k_eff may be smaller when the
/// projected Gram has lower numerical rank or eigenvalues vanish.
struct ReducedModel {
  Index k = 0;
  Index k_eff = 0;
  CVec lambda; // k_eff eigenvalues, non-increasing modulus
  CMat Xi;     // m x k_eff small left eigen-vectors (unit columns)
  CMat Zeta;   // m x k_eff small right eigen-vectors, rescaled
  Mat R, C, E;
  GramCache gram;
  Mat X_train; // needed to evaluate X^T Psi(theta) by the kernel trick
  Mat Y_train; // needed by the inverse
  double rank_tol = 1e-10;
  kernels::KernelSpec kernel;

  Index ambient_dim() const { return X_train.rows(); }
  Index pair_count() const { return X_train.cols(); }
};

inline constexpr double kDefaultRankTol = 1e-10;

ReducedModel fit(const SnapshotSet& snapshots, const kernels::KernelSpec& kernel, Index k,
                 double rank_tol = kDefaultRankTol);

/// Eigen-function values (phi_1(theta), ..., phi_keff(theta)) evaluated via
/// the kernel trick.
CVec eigenfunctions(const ReducedModel& model, const Vec& theta);

/// The m-vector g with B g = sum_i lambda_i^{t-1} phi_i(theta) zeta_i; the
/// coefficients of the predicted feature-space state over the Psi(y_i).
CVec coefficient_vector(const ReducedModel& model, const Vec& theta, int t);

enum class InverseMode { variational, closed_form };

struct Prediction {
  Vec state;
  double imag_residual = 0.0;    // |Im g| / |Re g| before the real part is taken
  bool conjugacy_warning = false;
  preimage::SolveDiagnostics diag; // converged=true for closed-form inverses
};

Prediction predict(const ReducedModel& model, const Vec& theta, int t, InverseMode mode,
                   const preimage::SolverOptions& opts = {});

void save_model(const std::filesystem::path& dir, const ReducedModel& model,
                const std::string& method = "okdmd");
ReducedModel load_model(const std::filesystem::path& dir);

} // namespace okdmd::core
