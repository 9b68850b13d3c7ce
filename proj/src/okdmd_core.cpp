// SPDX-License-Identifier: Apache-2.0
#include "okdmd/okdmd_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "okdmd/errors.hpp"
#include "okdmd/linalg.hpp"
#include "okdmd/matrix_io.hpp"

namespace okdmd::core {

namespace {

struct EigPairs {
  CVec values;
  CMat vectors;
};

// Keeps the keep_count largest-modulus eigen-pairs, dropping numerically zero
// eigenvalues (|lambda| <= rank_tol * |lambda_max|).
EigPairs top_pairs(const linalg::EigResult& full, Index keep_count, double rank_tol) {
  const double lmax = full.values.size() > 0 ? std::abs(full.values(0)) : 0.0;
  Index kept = 0;
  while (kept < keep_count && kept < full.values.size() &&
         std::abs(full.values(kept)) > rank_tol * lmax) {
    ++kept;
  }
  EigPairs out;
  out.values = full.values.head(kept);
  out.vectors = full.vectors.leftCols(kept);
  return out;
}

Vec kernel_column(const kernels::KernelSpec& kernel, const Mat& X, const Vec& theta) {
  Vec kappa(X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    kappa(j) = kernels::eval(kernel, X.col(j), theta);
  }
  return kappa;
}

} // namespace

void GramCache::validate() const {
  const Index m = Gxx.rows();
  if (Gxx.cols() != m || Gyy.rows() != m || Gyy.cols() != m || Gyx.rows() != m ||
      Gyx.cols() != m) {
    throw InvalidInputError("GramCache: matrices must all be m x m");
  }
  if (!Gxx.allFinite() || !Gyy.allFinite() || !Gyx.allFinite()) {
    throw InvalidInputError("GramCache: non-finite entries");
  }
}

GramCache build_gram(const SnapshotSet& snapshots, const kernels::KernelSpec& kernel) {
  snapshots.validate();
  kernel.validate();
  const Mat& X = snapshots.X;
  const Mat& Y = snapshots.Y;
  const Index m = X.cols();
  GramCache g;
  g.kernel = kernel;
  // Gxx and Gyy are symmetric; evaluate each unordered pair once.
  g.Gxx = Mat(m, m);
  g.Gyy = Mat(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = i; j < m; ++j) {
      const double hxx = kernels::eval(kernel, X.col(j), X.col(i));
      g.Gxx(i, j) = hxx;
      g.Gxx(j, i) = hxx;
      const double hyy = kernels::eval(kernel, Y.col(j), Y.col(i));
      g.Gyy(i, j) = hyy;
      g.Gyy(j, i) = hyy;
    }
  }
  g.Gyx = kernels::gram(kernel, X, Y);
  return g;
}

Mat z_gram(const GramCache& g, double rank_tol) {
  g.validate();
  const Mat p = linalg::projector_from_gram(g.Gxx, rank_tol);
  Mat zz = p * g.Gyy * p;
  return 0.5 * (zz + zz.transpose());
}

SmallMatrices small_matrices(const GramCache& g, Index k, double rank_tol) {
  g.validate();
  const Index m = g.pair_count();
  if (k < 1 || k > m) {
    throw InvalidInputError("small_matrices: k must satisfy 1 <= k <= m");
  }
  if (rank_tol < 0.0) rank_tol = linalg::auto_rank_tol(m, m);

  SmallMatrices out;

  // Spectral data of Gxx = V_X Sigma_X^2 V_X^T.
  const linalg::SymEigResult ex = linalg::sym_eig_psd(g.Gxx);
  const double lx_cut = rank_tol * ex.values(0);
  Vec sigma_x_inv = Vec::Zero(m);
  out.rank_x = 0;
  for (Index i = 0; i < m; ++i) {
    if (ex.values(i) > lx_cut) {
      sigma_x_inv(i) = 1.0 / std::sqrt(ex.values(i));
      ++out.rank_x;
    }
  }
  out.R = sigma_x_inv.asDiagonal() * ex.vectors.transpose();
  Mat px = Mat::Zero(m, m);
  for (Index i = 0; i < out.rank_x; ++i) {
    px.noalias() += ex.vectors.col(i) * ex.vectors.col(i).transpose();
  }

  // Spectral data of Z^T Z = P_x Gyy P_x.
  Mat zz = px * g.Gyy * px;
  zz = 0.5 * (zz + zz.transpose());
  const linalg::SymEigResult ez = linalg::sym_eig_psd(zz);
  const double lz_cut = rank_tol * std::max(ez.values(0), 0.0);
  out.rank_z = 0;
  for (Index i = 0; i < m; ++i) {
    if (ez.values(i) > lz_cut) ++out.rank_z;
  }
  const Index k_keep = std::min(k, out.rank_z);

  // S = P_x V_Z diag(sigma_Z^-2 on the first k) V_Z^T P_x and
  // C = diag(sigma_Z^-1 on the first k) V_Z^T P_x.
  Vec s2_inv = Vec::Zero(m);
  Vec s1_inv = Vec::Zero(m);
  for (Index i = 0; i < k_keep; ++i) {
    s2_inv(i) = 1.0 / ez.values(i);
    s1_inv(i) = 1.0 / std::sqrt(ez.values(i));
  }
  const Mat vz_px = ez.vectors.transpose() * px;
  Mat s = vz_px.transpose() * s2_inv.asDiagonal() * vz_px;
  out.C = s1_inv.asDiagonal() * vz_px;

  out.A_left_star = out.R * g.Gyy * s * g.Gyx * out.R.transpose();
  out.A_right = out.C * g.Gyy * out.R.transpose() * out.R * g.Gyx.transpose() * out.C.transpose();

  // E = Sigma_Z^+ V_Z^T P_x P_y Gyx R^T; pairs small left and right
  // eigen-vectors so that Zeta^T E Xi can be normalized to the identity.
  Vec sz_inv = Vec::Zero(m);
  for (Index i = 0; i < out.rank_z; ++i) sz_inv(i) = 1.0 / std::sqrt(ez.values(i));
  const Mat py = linalg::projector_from_gram(g.Gyy, rank_tol);
  out.E = sz_inv.asDiagonal() * ez.vectors.transpose() * px * py * g.Gyx * out.R.transpose();

  return out;
}

ReducedModel fit(const SnapshotSet& snapshots, const kernels::KernelSpec& kernel, Index k,
                 double rank_tol) {
  snapshots.validate();
  if (k < 1) throw InvalidInputError("fit: k must be >= 1");
  const Index m = snapshots.pair_count();
  if (k > m) k = m;

  ReducedModel model;
  model.k = k;
  model.kernel = kernel;
  model.rank_tol = rank_tol;
  model.X_train = snapshots.X;
  model.Y_train = snapshots.Y;
  model.gram = build_gram(snapshots, kernel);

  SmallMatrices sm = small_matrices(model.gram, k, rank_tol);
  model.R = std::move(sm.R);
  model.C = std::move(sm.C);
  model.E = std::move(sm.E);

  const Index k_cap = std::min(k, sm.rank_z);
  const linalg::EigResult left_full = linalg::eig(sm.A_left_star);
  const linalg::EigResult right_full = linalg::eig(sm.A_right);
  EigPairs left = top_pairs(left_full, k_cap, rank_tol);
  EigPairs right = top_pairs(right_full, k_cap, rank_tol);
  const Index k_eff = std::min(left.values.size(), right.values.size());

  // The two spectra coincide in exact arithmetic; match them greedily in the
  // complex plane and reorder the right family to the left one.
  const double lmax = k_eff > 0 ? std::abs(left.values(0)) : 0.0;
  const double gate = 1e-6 * std::max(lmax, 1e-300);
  std::vector<bool> used(static_cast<std::size_t>(right.values.size()), false);
  CVec lambda(k_eff);
  CMat xi(m, k_eff), zeta(m, k_eff);
  for (Index i = 0; i < k_eff; ++i) {
    Index best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < right.values.size(); ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      const double d = std::abs(left.values(i) - right.values(j));
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best < 0 || best_d > gate) {
      std::ostringstream msg;
      msg << "fit: left/right spectra cannot be paired at index " << i
          << " (gap " << best_d << ", gate " << gate << ")";
      throw NumericalFailure(msg.str());
    }
    used[static_cast<std::size_t>(best)] = true;
    lambda(i) = left.values(i);
    xi.col(i) = left.vectors.col(i); // unit norm, phase-fixed by linalg::eig
    zeta.col(i) = right.vectors.col(best);
  }

  // Keep conjugate pairs exactly closed after pairing.
  for (Index i = 0; i + 1 < k_eff; ++i) {
    if (lambda(i).imag() > 0.0 &&
        std::abs(lambda(i + 1) - std::conj(lambda(i))) <= gate) {
      zeta.col(i + 1) = zeta.col(i).conjugate();
    }
  }

  // Rescale the right vectors so that zeta_i^T E xi_i = 1 (the products are
  // bilinear: these are complexified eigen-vectors of real matrices). A
  // repeated eigenvalue leaves the eigen-bases free up to mixing, so indices
  // sharing an eigenvalue are bi-orthogonalized as a block.
  {
    const CMat e_cplx = model.E.cast<Complex>();
    std::vector<bool> processed(static_cast<std::size_t>(k_eff), false);
    for (Index i = 0; i < k_eff; ++i) {
      if (processed[static_cast<std::size_t>(i)]) continue;
      std::vector<Index> group{i};
      for (Index j = i + 1; j < k_eff; ++j) {
        if (!processed[static_cast<std::size_t>(j)] &&
            std::abs(lambda(j) - lambda(i)) <= gate) {
          group.push_back(j);
        }
      }
      for (const Index j : group) processed[static_cast<std::size_t>(j)] = true;

      if (group.size() == 1) {
        const Complex c = (zeta.col(i).transpose() * e_cplx * xi.col(i))(0);
        if (std::abs(c) < 1e-12) {
          std::ostringstream msg;
          msg << "fit: degenerate eigen-pair " << i << " (normalization product " << std::abs(c)
              << ")";
          throw DegenerateEigenpairError(msg.str());
        }
        zeta.col(i) /= c;
        continue;
      }
      if (std::abs(lambda(i).imag()) > gate) {
        std::ostringstream msg;
        msg << "fit: repeated complex eigenvalue at index " << i
            << "; eigen-bases cannot be paired";
        throw DegenerateEigenpairError(msg.str());
      }
      const Index gs = static_cast<Index>(group.size());
      CMat zg(m, gs), xg(m, gs);
      for (Index a = 0; a < gs; ++a) {
        zg.col(a) = zeta.col(group[static_cast<std::size_t>(a)]);
        xg.col(a) = xi.col(group[static_cast<std::size_t>(a)]);
      }
      const CMat pairing = zg.transpose() * e_cplx * xg;
      const Eigen::JacobiSVD<CMat> svd(pairing, Eigen::ComputeFullU | Eigen::ComputeFullV);
      if (svd.singularValues()(gs - 1) < 1e-12 * std::max(1.0, svd.singularValues()(0))) {
        std::ostringstream msg;
        msg << "fit: degenerate eigen-group at eigenvalue " << lambda(i)
            << " (pairing matrix numerically singular)";
        throw DegenerateEigenpairError(msg.str());
      }
      const CMat zg_new = zg * pairing.inverse().transpose();
      for (Index a = 0; a < gs; ++a) {
        zeta.col(group[static_cast<std::size_t>(a)]) = zg_new.col(a);
      }
    }
  }

  model.k_eff = k_eff;
  model.lambda = std::move(lambda);
  model.Xi = std::move(xi);
  model.Zeta = std::move(zeta);
  return model;
}

CVec eigenfunctions(const ReducedModel& model, const Vec& theta) {
  if (theta.size() != model.ambient_dim()) {
    throw InvalidInputError("eigenfunctions: theta dimension mismatch");
  }
  const Vec kappa = kernel_column(model.kernel, model.X_train, theta);
  const Vec r_kappa = model.R * kappa;
  return model.Xi.transpose() * r_kappa.cast<Complex>();
}

CVec coefficient_vector(const ReducedModel& model, const Vec& theta, int t) {
  if (t < 1) throw InvalidInputError("coefficient_vector: t must be >= 1");
  const CVec phi = eigenfunctions(model, theta);
  CVec nu(model.k_eff);
  for (Index i = 0; i < model.k_eff; ++i) {
    const double mag = std::abs(model.lambda(i));
    if (t > 1 && mag > 0.0 && (t - 1) * std::log(mag) > 300.0 * std::log(10.0)) {
      std::ostringstream msg;
      msg << "coefficient_vector: |lambda_" << i << "|^" << (t - 1) << " overflows at t=" << t;
      throw HorizonOverflowError(msg.str());
    }
    nu(i) = std::pow(model.lambda(i), t - 1) * phi(i);
  }
  return model.C.transpose().cast<Complex>() * (model.Zeta * nu);
}

Prediction predict(const ReducedModel& model, const Vec& theta, int t, InverseMode mode,
                   const preimage::SolverOptions& opts) {
  const CVec gc = coefficient_vector(model, theta, t);
  const double re_norm = gc.real().norm();
  const double im_norm = gc.imag().norm();

  Prediction out;
  out.imag_residual = im_norm / std::max(re_norm, 1e-300);
  out.conjugacy_warning = im_norm > 1e-6 * re_norm && im_norm > 1e-300;

  preimage::PreimageProblem prob{gc.real(), model.Y_train, model.kernel};
  if (mode == InverseMode::closed_form) {
    out.state = preimage::closed_form(prob);
    out.diag.converged = true;
    out.diag.objective = 0.0;
  } else {
    preimage::SolveResult sol = preimage::solve_variational(prob, opts);
    out.state = std::move(sol.x);
    out.diag = sol.diag;
  }
  return out;
}

void save_model(const std::filesystem::path& dir, const ReducedModel& model,
                const std::string& method) {
  std::filesystem::create_directories(dir);
  namespace io = okdmd::linalg;
  io::save_matrix(dir / "X.mat", model.X_train);
  io::save_matrix(dir / "Y.mat", model.Y_train);
  io::save_matrix(dir / "Gxx.mat", model.gram.Gxx);
  io::save_matrix(dir / "Gyy.mat", model.gram.Gyy);
  io::save_matrix(dir / "Gyx.mat", model.gram.Gyx);
  io::save_matrix(dir / "R.mat", model.R);
  io::save_matrix(dir / "C.mat", model.C);
  io::save_matrix(dir / "E.mat", model.E);
  io::save_matrix(dir / "lambda.mat", CMat(model.lambda));
  io::save_matrix(dir / "Xi.mat", model.Xi);
  io::save_matrix(dir / "Zeta.mat", model.Zeta);
  MetaMap meta;
  meta["method"] = method;
  meta["kernel"] = model.kernel.designation();
  meta["k"] = std::to_string(model.k);
  meta["k_eff"] = std::to_string(model.k_eff);
  meta["p"] = std::to_string(model.ambient_dim());
  meta["m"] = std::to_string(model.pair_count());
  std::ostringstream tol;
  tol.precision(17);
  tol << model.rank_tol;
  meta["rank_tol"] = tol.str();
  save_meta(dir / "model.meta", meta);
}

ReducedModel load_model(const std::filesystem::path& dir) {
  namespace io = okdmd::linalg;
  const MetaMap meta = load_meta(dir / "model.meta");
  const auto require = [&](const char* key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) {
      throw InvalidInputError(dir.string() + "/model.meta: missing key '" + key + "'");
    }
    return it->second;
  };
  if (require("method") == "kdmd") {
    throw InvalidInputError("load_model: directory holds a kdmd model");
  }
  ReducedModel model;
  model.kernel = kernels::KernelSpec::parse(require("kernel"));
  model.k = std::stol(require("k"));
  model.k_eff = std::stol(require("k_eff"));
  model.rank_tol = std::stod(require("rank_tol"));
  model.X_train = io::load_real_matrix(dir / "X.mat");
  model.Y_train = io::load_real_matrix(dir / "Y.mat");
  model.gram.Gxx = io::load_real_matrix(dir / "Gxx.mat");
  model.gram.Gyy = io::load_real_matrix(dir / "Gyy.mat");
  model.gram.Gyx = io::load_real_matrix(dir / "Gyx.mat");
  model.gram.kernel = model.kernel;
  model.R = io::load_real_matrix(dir / "R.mat");
  model.C = io::load_real_matrix(dir / "C.mat");
  model.E = io::load_real_matrix(dir / "E.mat");
  model.lambda = CVec(io::load_matrix(dir / "lambda.mat"));
  model.Xi = io::load_matrix(dir / "Xi.mat");
  model.Zeta = io::load_matrix(dir / "Zeta.mat");
  if (std::stol(require("p")) != model.ambient_dim() ||
      std::stol(require("m")) != model.pair_count()) {
    throw InvalidInputError("load_model: manifest dimensions disagree with matrices");
  }
  return model;
}

} // namespace okdmd::core
