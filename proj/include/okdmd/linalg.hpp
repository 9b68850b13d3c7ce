// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "okdmd/types.hpp"

namespace okdmd::linalg {

/// Thresholded ranks everywhere default to max(rows, cols) * 1e-12 when the
/// caller passes a negative tolerance.
double auto_rank_tol(Index rows, Index cols);

struct SvdResult {
  Mat U;     // left singular vectors, thin
  Vec sigma; // non-increasing, >= 0
  Mat V;     // right singular vectors, thin
};

/// Thin SVD with sigma sorted non-increasing. U*diag(sigma)*V^T reconstructs
/// the input to 1e-10 * |M| relative.
SvdResult svd(const Mat& m);

/// Moore-Penrose pseudo-inverse; singular values sigma_i <= rank_tol * sigma_1
/// are treated as zero.
Mat pseudo_inverse(const Mat& m, double rank_tol = -1.0);
CMat pseudo_inverse(const CMat& m, double rank_tol = -1.0);

struct EigResult {
  CVec values;  // sorted by (|lambda| desc, Re desc, Im desc)
  CMat vectors; // unit columns, first nonzero component real-positive
};

/// Dense non-symmetric eigen-decomposition. For real input, complex
/// eigenvalues come in conjugate pairs stored adjacently (positive imaginary
/// part first) with conjugate eigenvectors.
EigResult eig(const Mat& m);
EigResult eig(const CMat& m);

/// Given G = M^T M, returns the m-by-m coordinate form of the orthogonal
/// projector onto the image of M^T, i.e. pinv(M)*M = V D V^T with D_ii = 1
/// where the spectrum of G clears rank_tol * lambda_max.
Mat projector_from_gram(const Mat& g, double rank_tol = -1.0);

/// Numerical rank of a PSD Gram matrix at the same threshold used by
/// projector_from_gram.
Index gram_rank(const Mat& g, double rank_tol = -1.0);

/// Eigen-decomposition of a symmetric PSD matrix, eigenvalues descending and
/// clamped at zero. Validates symmetry and near-positive-semidefiniteness.
struct SymEigResult {
  Vec values; // descending, >= 0
  Mat vectors;
};
SymEigResult sym_eig_psd(const Mat& g);

} // namespace okdmd::linalg
