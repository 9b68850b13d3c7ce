// SPDX-License-Identifier: Apache-2.0
#include "okdmd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "okdmd/errors.hpp"

namespace okdmd::linalg {

namespace {

template <typename M>
void require_finite(const M& m, const char* op) {
  if (!m.allFinite()) {
    throw InvalidInputError(std::string(op) + ": non-finite input entries");
  }
  if (m.rows() < 1 || m.cols() < 1) {
    throw InvalidInputError(std::string(op) + ": empty matrix");
  }
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
pinv_impl(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m, double rank_tol) {
  using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require_finite(m, "pseudo_inverse");
  if (rank_tol < 0.0) rank_tol = auto_rank_tol(m.rows(), m.cols());
  Eigen::JacobiSVD<MatT> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  Vec inv = Vec::Zero(s.size());
  const double cut = rank_tol * (s.size() > 0 ? s(0) : 0.0);
  for (Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) inv(i) = 1.0 / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

// Deterministic spectral order: |lambda| desc, then Re desc, then Im desc.
bool eig_before(Complex a, Complex b) {
  const double ma = std::abs(a), mb = std::abs(b);
  if (ma != mb) return ma > mb;
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() > b.imag();
}

void fix_phase(CMat& vectors) {
  for (Index j = 0; j < vectors.cols(); ++j) {
    auto col = vectors.col(j);
    const double nrm = col.norm();
    if (nrm == 0.0) continue;
    col /= nrm;
    const double thresh = 1e-12 * col.cwiseAbs().maxCoeff();
    for (Index i = 0; i < col.size(); ++i) {
      const double a = std::abs(col(i));
      if (a > thresh) {
        col *= std::conj(col(i)) / a;
        break;
      }
    }
  }
}

EigResult sort_eig(CVec values, CMat vectors) {
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return eig_before(values(a), values(b)); });
  CVec sv(values.size());
  CMat svec(vectors.rows(), vectors.cols());
  for (Index i = 0; i < values.size(); ++i) {
    sv(i) = values(order[static_cast<std::size_t>(i)]);
    svec.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
  }
  return {std::move(sv), std::move(svec)};
}

// For real matrices the spectrum is conjugate-closed; store each complex pair
// adjacently as (lambda, conj(lambda)) with exactly conjugate vectors.
void enforce_conjugate_pairs(EigResult& r, double scale) {
  const double tol = 1e-9 * std::max(scale, 1e-300);
  const Index n = r.values.size();
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    if (used[static_cast<std::size_t>(i)]) continue;
    if (std::abs(r.values(i).imag()) <= tol) {
      // Numerically real eigenvalue of a real matrix.
      r.values(i) = Complex(r.values(i).real(), 0.0);
      used[static_cast<std::size_t>(i)] = true;
      continue;
    }
    Index partner = -1;
    double best = tol;
    for (Index j = i + 1; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double d = std::abs(r.values(j) - std::conj(r.values(i)));
      if (d < best) {
        best = d;
        partner = j;
      }
    }
    if (partner < 0) {
      throw NumericalFailure("eig: conjugate partner missing for a complex eigenvalue");
    }
    // Move the partner right after i, keep the +Im member first.
    if (partner != i + 1) {
      std::swap(r.values(partner), r.values(i + 1));
      r.vectors.col(partner).swap(r.vectors.col(i + 1));
    }
    if (r.values(i).imag() < 0.0) {
      std::swap(r.values(i), r.values(i + 1));
      r.vectors.col(i).swap(r.vectors.col(i + 1));
    }
    r.values(i + 1) = std::conj(r.values(i));
    r.vectors.col(i + 1) = r.vectors.col(i).conjugate();
    used[static_cast<std::size_t>(i)] = true;
    used[static_cast<std::size_t>(i + 1)] = true;
    ++i;
  }
}

template <typename MatT>
void check_residuals(const MatT& m, const EigResult& r, const char* op) {
  const double scale = m.norm();
  const double tol = 1e-10 * std::max(scale, 1e-300);
  for (Index j = 0; j < r.values.size(); ++j) {
    const double resid = (m.template cast<Complex>() * r.vectors.col(j) -
                          r.values(j) * r.vectors.col(j))
                             .norm();
    if (!(resid <= tol * 1e2)) { // 1e2: headroom over the documented 1e-10 contract
      std::ostringstream msg;
      msg << op << ": eigen residual " << resid << " exceeds tolerance at index " << j;
      throw NumericalFailure(msg.str());
    }
  }
}

double condition_estimate(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  const Vec& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) == 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

} // namespace

double auto_rank_tol(Index rows, Index cols) {
  return static_cast<double>(std::max(rows, cols)) * 1e-12;
}

SvdResult svd(const Mat& m) {
  require_finite(m, "svd");
  Eigen::JacobiSVD<Mat> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

Mat pseudo_inverse(const Mat& m, double rank_tol) { return pinv_impl<double>(m, rank_tol); }
CMat pseudo_inverse(const CMat& m, double rank_tol) { return pinv_impl<Complex>(m, rank_tol); }

EigResult eig(const Mat& m) {
  require_finite(m, "eig");
  if (m.rows() != m.cols()) throw InvalidInputError("eig: matrix must be square");
  Eigen::EigenSolver<Mat> solver(m, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eig: iteration failed to converge (condition estimate "
        << condition_estimate(m) << ")";
    throw NumericalFailure(msg.str());
  }
  EigResult r = sort_eig(solver.eigenvalues(), solver.eigenvectors());
  enforce_conjugate_pairs(r, m.norm());
  fix_phase(r.vectors);
  check_residuals(m, r, "eig");
  return r;
}

EigResult eig(const CMat& m) {
  require_finite(m, "eig");
  if (m.rows() != m.cols()) throw InvalidInputError("eig: matrix must be square");
  Eigen::ComplexEigenSolver<CMat> solver(m, /*computeEigenvectors=*/true);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("eig: iteration failed to converge (complex input)");
  }
  EigResult r = sort_eig(solver.eigenvalues(), solver.eigenvectors());
  fix_phase(r.vectors);
  check_residuals(m, r, "eig");
  return r;
}

SymEigResult sym_eig_psd(const Mat& g) {
  require_finite(g, "sym_eig_psd");
  if (g.rows() != g.cols()) throw InvalidInputError("sym_eig_psd: matrix must be square");
  const double scale = g.cwiseAbs().maxCoeff();
  const double asym = (g - g.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, scale)) {
    throw InvalidInputError("sym_eig_psd: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> solver(0.5 * (g + g.transpose()));
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("sym_eig_psd: eigen-decomposition failed");
  }
  Vec ev = solver.eigenvalues(); // ascending
  const double lmax = ev(ev.size() - 1);
  if (ev(0) < -1e-10 * std::max(lmax, 1e-300)) {
    throw InvalidInputError("sym_eig_psd: matrix is numerically indefinite");
  }
  SymEigResult out;
  out.values = ev.reverse().cwiseMax(0.0);
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

Mat projector_from_gram(const Mat& g, double rank_tol) {
  if (rank_tol < 0.0) rank_tol = auto_rank_tol(g.rows(), g.cols());
  SymEigResult se = sym_eig_psd(g);
  const double cut = rank_tol * (se.values.size() > 0 ? se.values(0) : 0.0);
  Mat p = Mat::Zero(g.rows(), g.cols());
  for (Index i = 0; i < se.values.size(); ++i) {
    if (se.values(i) > cut) {
      p.noalias() += se.vectors.col(i) * se.vectors.col(i).transpose();
    }
  }
  return p;
}

Index gram_rank(const Mat& g, double rank_tol) {
  if (rank_tol < 0.0) rank_tol = auto_rank_tol(g.rows(), g.cols());
  SymEigResult se = sym_eig_psd(g);
  const double cut = rank_tol * (se.values.size() > 0 ? se.values(0) : 0.0);
  Index r = 0;
  for (Index i = 0; i < se.values.size(); ++i) {
    if (se.values(i) > cut) ++r;
  }
  return r;
}

} // namespace okdmd::linalg
