// SPDX-License-Identifier: Apache-2.0
#include "okdmd/baselines.hpp"

#include <cmath>
#include <sstream>

#include "okdmd/errors.hpp"
#include "okdmd/linalg.hpp"
#include "okdmd/matrix_io.hpp"

namespace okdmd::baselines {

KdmdModel kdmd_fit(const core::SnapshotSet& snapshots, const kernels::KernelSpec& kernel,
                   double rank_tol) {
  snapshots.validate();
  const Index m = snapshots.pair_count();

  KdmdModel model;
  model.kernel = kernel;
  model.rank_tol = rank_tol;
  model.X_train = snapshots.X;
  model.Y_train = snapshots.Y;
  model.gram = core::build_gram(snapshots, kernel);

  const linalg::SymEigResult ex = linalg::sym_eig_psd(model.gram.Gxx);
  const double cut = rank_tol * ex.values(0);
  Vec sigma_inv = Vec::Zero(m);
  Index rank_x = 0;
  for (Index i = 0; i < m; ++i) {
    if (ex.values(i) > cut) {
      sigma_inv(i) = 1.0 / std::sqrt(ex.values(i));
      ++rank_x;
    }
  }
  model.gxx_rank_deficient = rank_x < m;
  model.R = sigma_inv.asDiagonal() * ex.vectors.transpose();

  const linalg::EigResult pairs = linalg::eig(Mat(model.R * model.gram.Gyx * model.R.transpose()));
  model.lambda = pairs.values;
  model.Xi = pairs.vectors;

  // Least-squares eigen-modes: (mu_1 ... mu_m) = Y R^T pinv(Xi^T) diag(lambda^+).
  // Zero eigenvalues zero out their modes, following the pseudo-inverse
  // convention.
  const double lmax = std::abs(model.lambda(0));
  CVec lambda_pinv(m);
  for (Index i = 0; i < m; ++i) {
    const double mag = std::abs(model.lambda(i));
    lambda_pinv(i) = mag > rank_tol * lmax ? 1.0 / model.lambda(i) : Complex(0.0, 0.0);
  }
  const CMat xi_t_pinv = linalg::pseudo_inverse(CMat(model.Xi.transpose()), rank_tol);
  model.modes = model.Y_train.cast<Complex>() * model.R.transpose().cast<Complex>() * xi_t_pinv *
                lambda_pinv.asDiagonal();
  return model;
}

core::Prediction kdmd_predict(const KdmdModel& model, const Vec& theta, int t, Index k) {
  if (t < 1) throw InvalidInputError("kdmd_predict: t must be >= 1");
  if (k < 1 || k > model.pair_count()) {
    throw InvalidInputError("kdmd_predict: k must satisfy 1 <= k <= m");
  }
  if (theta.size() != model.ambient_dim()) {
    throw InvalidInputError("kdmd_predict: theta dimension mismatch");
  }

  Vec kappa(model.pair_count());
  for (Index j = 0; j < model.pair_count(); ++j) {
    kappa(j) = kernels::eval(model.kernel, model.X_train.col(j), theta);
  }
  const CVec phi = model.Xi.transpose() * (model.R * kappa).cast<Complex>();

  CVec acc = CVec::Zero(model.ambient_dim());
  for (Index i = 0; i < k; ++i) {
    const double mag = std::abs(model.lambda(i));
    if (t > 1 && mag > 0.0 && (t - 1) * std::log(mag) > 300.0 * std::log(10.0)) {
      std::ostringstream msg;
      msg << "kdmd_predict: |lambda_" << i << "|^" << (t - 1) << " overflows at t=" << t;
      throw HorizonOverflowError(msg.str());
    }
    acc += std::pow(model.lambda(i), t - 1) * phi(i) * model.modes.col(i);
  }

  core::Prediction out;
  const double re_norm = acc.real().norm();
  const double im_norm = acc.imag().norm();
  out.imag_residual = im_norm / std::max(re_norm, 1e-300);
  out.conjugacy_warning = im_norm > 1e-6 * re_norm && im_norm > 1e-300;
  out.state = acc.real();
  out.diag.converged = true;
  return out;
}

core::ReducedModel lowrank_dmd_fit(const core::SnapshotSet& snapshots, Index k, double rank_tol) {
  return core::fit(snapshots, kernels::KernelSpec::linear(), k, rank_tol);
}

void save_kdmd_model(const std::filesystem::path& dir, const KdmdModel& model) {
  std::filesystem::create_directories(dir);
  namespace io = okdmd::linalg;
  io::save_matrix(dir / "X.mat", model.X_train);
  io::save_matrix(dir / "Y.mat", model.Y_train);
  io::save_matrix(dir / "Gxx.mat", model.gram.Gxx);
  io::save_matrix(dir / "Gyy.mat", model.gram.Gyy);
  io::save_matrix(dir / "Gyx.mat", model.gram.Gyx);
  io::save_matrix(dir / "R.mat", model.R);
  io::save_matrix(dir / "lambda.mat", CMat(model.lambda));
  io::save_matrix(dir / "Xi.mat", model.Xi);
  io::save_matrix(dir / "modes.mat", model.modes);
  core::MetaMap meta;
  meta["method"] = "kdmd";
  meta["kernel"] = model.kernel.designation();
  meta["k"] = std::to_string(model.pair_count());
  meta["k_eff"] = std::to_string(model.pair_count());
  meta["p"] = std::to_string(model.ambient_dim());
  meta["m"] = std::to_string(model.pair_count());
  std::ostringstream tol;
  tol.precision(17);
  tol << model.rank_tol;
  meta["rank_tol"] = tol.str();
  core::save_meta(dir / "model.meta", meta);
}

KdmdModel load_kdmd_model(const std::filesystem::path& dir) {
  namespace io = okdmd::linalg;
  const core::MetaMap meta = core::load_meta(dir / "model.meta");
  auto it = meta.find("method");
  if (it == meta.end() || it->second != "kdmd") {
    throw InvalidInputError("load_kdmd_model: directory does not hold a kdmd model");
  }
  KdmdModel model;
  model.kernel = kernels::KernelSpec::parse(meta.at("kernel"));
  model.rank_tol = std::stod(meta.at("rank_tol"));
  model.X_train = io::load_real_matrix(dir / "X.mat");
  model.Y_train = io::load_real_matrix(dir / "Y.mat");
  model.gram.Gxx = io::load_real_matrix(dir / "Gxx.mat");
  model.gram.Gyy = io::load_real_matrix(dir / "Gyy.mat");
  model.gram.Gyx = io::load_real_matrix(dir / "Gyx.mat");
  model.gram.kernel = model.kernel;
  model.R = io::load_real_matrix(dir / "R.mat");
  model.lambda = CVec(io::load_matrix(dir / "lambda.mat"));
  model.Xi = io::load_matrix(dir / "Xi.mat");
  model.modes = io::load_matrix(dir / "modes.mat");
  return model;
}

} // namespace okdmd::baselines
