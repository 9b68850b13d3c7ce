// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>

#include "okdmd/kernels.hpp"
#include "okdmd/types.hpp"

namespace okdmd::preimage {

/// Recover z minimizing h(z,z) - 2 sum_i g_i h(y_i, z), i.e. the state whose
/// feature image best matches the combination sum_i g_i Psi(y_i).
struct PreimageProblem {
  Vec g;   // m coefficients
  Mat Y;   // p x m training successors
  kernels::KernelSpec kernel;

  void validate() const;
};

struct SolverOptions {
  int max_iters = 500;
  double gradient_tolerance = 1e-9;
  /// When non-empty, overrides the default initial point (the kernel's
  /// closed-form approximation).
  Vec initial_point;
  int lbfgs_history = 10;
};

struct SolveDiagnostics {
  int iterations = 0;
  double grad_norm = 0.0;
  double objective = 0.0;
  bool converged = false;
};

struct SolveResult {
  Vec x;
  SolveDiagnostics diag;
};

/// Objective value and gradient of the raw pre-image objective at z.
std::pair<double, Vec> objective_and_gradient(const PreimageProblem& prob, const Vec& z);

/// Line-search descent (L-BFGS) to first-order stationarity
/// |grad| <= tol * max(1, |f|). Non-convergence returns the best iterate with
/// converged = false, never silently.
SolveResult solve_variational(const PreimageProblem& prob, const SolverOptions& opts = {});

/// Closed-form inverse: exact for linear and logarithmic kernels, the
/// small-data approximation for polynomial (Y g) and Gaussian
/// (Y g / sum_i g_i) kernels.
Vec closed_form(const PreimageProblem& prob);

} // namespace okdmd::preimage
