// SPDX-License-Identifier: Apache-2.0
#include "okdmd/preimage.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <tuple>
#include <vector>

#include "okdmd/errors.hpp"

namespace okdmd::preimage {

namespace {

using kernels::Family;

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_log_domain_or_throw(const Vec& z) {
  for (Index j = 0; j < z.size(); ++j) {
    if (!(z(j) > -1.0)) {
      std::ostringstream msg;
      msg << "pre-image point leaves the logarithmic kernel domain at component " << j;
      throw KernelDomainError(msg.str());
    }
  }
}

bool in_log_domain(const Vec& z) {
  return (z.array() > -1.0).all();
}

// Raw objective and gradient, assuming the point is inside the kernel domain.
std::pair<double, Vec> raw_objective(const PreimageProblem& prob, const Vec& z) {
  const Mat& Y = prob.Y;
  const Vec& g = prob.g;
  switch (prob.kernel.family) {
    case Family::linear: {
      const Vec yg = Y * g;
      const double f = z.squaredNorm() - 2.0 * yg.dot(z);
      return {f, 2.0 * z - 2.0 * yg};
    }
    case Family::polynomial: {
      const int gamma = prob.kernel.gamma;
      const Vec w = Y.transpose() * z; // w_i = y_i . z
      double f = std::pow(1.0 + z.squaredNorm(), gamma);
      Vec weights(w.size());
      for (Index i = 0; i < w.size(); ++i) {
        f -= 2.0 * g(i) * std::pow(1.0 + w(i), gamma);
        weights(i) = g(i) * std::pow(1.0 + w(i), gamma - 1);
      }
      Vec grad = 2.0 * gamma * std::pow(1.0 + z.squaredNorm(), gamma - 1) * z;
      grad.noalias() -= 2.0 * gamma * (Y * weights);
      return {f, grad};
    }
    case Family::gaussian: {
      const double inv2s2 = 1.0 / (2.0 * prob.kernel.sigma * prob.kernel.sigma);
      double f = 1.0; // h(z, z)
      Vec grad = Vec::Zero(z.size());
      for (Index i = 0; i < Y.cols(); ++i) {
        const Vec d = Y.col(i) - z;
        const double e = std::exp(-d.squaredNorm() * inv2s2);
        f -= 2.0 * g(i) * e;
        grad.noalias() -= 4.0 * inv2s2 * g(i) * e * d; // -(2/sigma^2) g_i e (y_i - z)
      }
      return {f, grad};
    }
    case Family::logarithmic: {
      check_log_domain_or_throw(z);
      Vec lz(z.size());
      for (Index j = 0; j < z.size(); ++j) lz(j) = std::log1p(z(j));
      Vec a = Vec::Zero(z.size()); // a_j = sum_i g_i log(1 + Y_ji)
      for (Index i = 0; i < Y.cols(); ++i) {
        for (Index j = 0; j < z.size(); ++j) a(j) += g(i) * std::log1p(Y(j, i));
      }
      const double f = lz.squaredNorm() - 2.0 * a.dot(lz);
      Vec grad(z.size());
      for (Index j = 0; j < z.size(); ++j) {
        grad(j) = 2.0 * (lz(j) - a(j)) / (1.0 + z(j));
      }
      return {f, grad};
    }
  }
  throw InvalidInputError("objective_and_gradient: unknown kernel family");
}

// Objective actually minimized by the solver. For Gaussian problems whose
// exponential sum is positive at the initial point we descend the -log form,
// which is better conditioned and matches the coercivity argument; points
// where the sum turns non-positive evaluate to +inf so the line search backs
// off. Out-of-domain log-kernel points also evaluate to +inf.
struct SolverObjective {
  const PreimageProblem& prob;
  bool gaussian_log_form = false;

  std::pair<double, Vec> operator()(const Vec& z) const {
    if (prob.kernel.family == Family::logarithmic && !in_log_domain(z)) {
      return {kInf, Vec::Zero(z.size())};
    }
    if (gaussian_log_form) {
      const double inv2s2 = 1.0 / (2.0 * prob.kernel.sigma * prob.kernel.sigma);
      double s = 0.0;
      Vec ds = Vec::Zero(z.size());
      for (Index i = 0; i < prob.Y.cols(); ++i) {
        const Vec d = prob.Y.col(i) - z;
        const double e = std::exp(-d.squaredNorm() * inv2s2);
        s += prob.g(i) * e;
        ds.noalias() += prob.g(i) * e * 2.0 * inv2s2 * d;
      }
      if (!(s > 0.0)) return {kInf, Vec::Zero(z.size())};
      return {-std::log(s), -ds / s};
    }
    return raw_objective(prob, z);
  }
};

} // namespace

void PreimageProblem::validate() const {
  if (g.size() != Y.cols()) {
    throw InvalidInputError("PreimageProblem: coefficient count does not match Y columns");
  }
  if (!g.allFinite() || !Y.allFinite()) {
    throw InvalidInputError("PreimageProblem: non-finite data");
  }
  kernel.validate();
  if (kernel.family == Family::logarithmic && !(Y.array() > -1.0).all()) {
    throw KernelDomainError("PreimageProblem: Y has entries <= -1 under the logarithmic kernel");
  }
}

std::pair<double, Vec> objective_and_gradient(const PreimageProblem& prob, const Vec& z) {
  prob.validate();
  if (z.size() != prob.Y.rows()) {
    throw InvalidInputError("objective_and_gradient: point dimension mismatch");
  }
  return raw_objective(prob, z);
}

Vec closed_form(const PreimageProblem& prob) {
  prob.validate();
  const Mat& Y = prob.Y;
  const Vec& g = prob.g;
  switch (prob.kernel.family) {
    case Family::linear:
    case Family::polynomial:
      return Y * g;
    case Family::gaussian: {
      const double s = g.sum();
      if (std::abs(s) <= 1e-12) {
        throw DegenerateCoefficientsError(
            "gaussian closed form: coefficient sum is numerically zero");
      }
      return (Y * g) / s;
    }
    case Family::logarithmic: {
      Vec out(Y.rows());
      for (Index j = 0; j < Y.rows(); ++j) {
        double acc = 0.0;
        for (Index i = 0; i < Y.cols(); ++i) acc += g(i) * std::log1p(Y(j, i));
        out(j) = std::expm1(acc);
      }
      return out;
    }
  }
  throw InvalidInputError("closed_form: unknown kernel family");
}

SolveResult solve_variational(const PreimageProblem& prob, const SolverOptions& opts) {
  prob.validate();
  if (opts.max_iters < 1 || !(opts.gradient_tolerance > 0.0)) {
    throw InvalidInputError("SolverOptions: max_iters and gradient_tolerance must be positive");
  }

  Vec z;
  if (opts.initial_point.size() > 0) {
    z = opts.initial_point;
  } else {
    try {
      z = closed_form(prob);
    } catch (const DegenerateCoefficientsError&) {
      // Gaussian with a vanishing coefficient sum: start from the raw
      // combination instead of the normalized one.
      z = prob.Y * prob.g;
    }
  }
  if (z.size() != prob.Y.rows()) {
    throw InvalidInputError("solve_variational: initial point dimension mismatch");
  }
  if (prob.kernel.family == Family::logarithmic) check_log_domain_or_throw(z);

  SolverObjective objective{prob};
  if (prob.kernel.family == Family::gaussian) {
    objective.gaussian_log_form = true;
    if (!std::isfinite(objective(z).first)) objective.gaussian_log_form = false;
  }

  auto [f, grad] = objective(z);
  Vec best_z = z;
  double best_f = f;

  const auto stationary = [&](double fv, const Vec& gv) {
    return gv.norm() <= opts.gradient_tolerance * std::max(1.0, std::abs(fv));
  };

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;
  SolveDiagnostics diag;

  int iter = 0;
  bool converged = stationary(f, grad);
  while (!converged && iter < opts.max_iters) {
    // Two-loop L-BFGS direction.
    Vec q = grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t h = s_hist.size(); h-- > 0;) {
      alpha[h] = rho_hist[h] * s_hist[h].dot(q);
      q.noalias() -= alpha[h] * y_hist[h];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      const double beta = rho_hist[h] * y_hist[h].dot(q);
      q.noalias() += (alpha[h] - beta) * s_hist[h];
    }
    Vec dir = -q;
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) { // not a descent direction, restart from steepest descent
      dir = -grad;
      slope = -grad.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    // Armijo backtracking.
    double step = 1.0;
    Vec z_new;
    double f_new = kInf;
    Vec grad_new;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      z_new = z + step * dir;
      auto [ft, gt] = objective(z_new);
      if (std::isfinite(ft) && ft <= f + 1e-4 * step * slope) {
        f_new = ft;
        grad_new = std::move(gt);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break; // line search stalled; report best iterate

    if (f_new < -1e300) {
      throw NumericalFailure("solve_variational: objective diverges to -inf");
    }

    const Vec s_vec = z_new - z;
    const Vec y_vec = grad_new - grad;
    const double sy = s_vec.dot(y_vec);
    if (sy > 1e-14 * s_vec.norm() * y_vec.norm()) {
      s_hist.push_back(s_vec);
      y_hist.push_back(y_vec);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.lbfgs_history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    z = std::move(z_new);
    f = f_new;
    grad = std::move(grad_new);
    if (f < best_f) {
      best_f = f;
      best_z = z;
    }
    ++iter;
    converged = stationary(f, grad);
  }

  if (f > best_f) {
    z = best_z;
    std::tie(f, grad) = objective(z);
  }
  diag.iterations = iter;
  diag.grad_norm = grad.norm();
  diag.objective = f;
  diag.converged = stationary(f, grad);
  return {std::move(z), diag};
}

} // namespace okdmd::preimage
