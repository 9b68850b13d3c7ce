// SPDX-License-Identifier: Apache-2.0
#include "okdmd/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <tuple>

#include "okdmd/errors.hpp"
#include "okdmd/linalg.hpp"

namespace okdmd::harness {

namespace {

std::string status_of(const std::exception& e) {
  if (dynamic_cast<const KernelDomainError*>(&e)) return "kernel-domain";
  if (dynamic_cast<const CapabilityError*>(&e)) return "capability";
  if (dynamic_cast<const CapacityError*>(&e)) return "capacity";
  if (dynamic_cast<const DegenerateEigenpairError*>(&e)) return "degenerate-eigenpair";
  if (dynamic_cast<const DegenerateCoefficientsError*>(&e)) return "degenerate-coefficients";
  if (dynamic_cast<const HorizonOverflowError*>(&e)) return "horizon-overflow";
  if (dynamic_cast<const NumericalFailure*>(&e)) return "numerical-failure";
  if (dynamic_cast<const GenerationError*>(&e)) return "generation";
  if (dynamic_cast<const InvalidInputError*>(&e)) return "invalid-input";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  return "error";
}

// Trajectory bookkeeping: with provenance (N, T) each trajectory occupies
// T-1 consecutive columns and its initial condition is the first X column of
// the block; without provenance every column is its own length-2 trajectory.
struct Trajectories {
  Index count;
  Index steps; // T - 1
};

Trajectories trajectories_of(const core::SnapshotSet& set) {
  if (set.N > 0 && set.T > 1) {
    return {static_cast<Index>(set.N), static_cast<Index>(set.T - 1)};
  }
  return {set.pair_count(), 1};
}

template <typename PredictFn>
SetPredictions predict_set(const core::SnapshotSet& set, PredictFn&& predict_fn) {
  const Trajectories traj = trajectories_of(set);
  SetPredictions out;
  out.values = Mat(set.ambient_dim(), set.pair_count());
  for (Index i = 0; i < traj.count; ++i) {
    const Vec theta = set.X.col(traj.steps * i);
    for (Index s = 0; s < traj.steps; ++s) {
      const core::Prediction pred = predict_fn(theta, static_cast<int>(s) + 2);
      out.values.col(traj.steps * i + s) = pred.state;
      out.total += 1;
      out.converged += pred.diag.converged ? 1 : 0;
    }
  }
  return out;
}

double norm2(const Mat& a) {
  // Spectral norm by power iteration on A^T A; deterministic start.
  if (a.size() == 0) return 0.0;
  Vec v = Vec::Ones(a.cols()).normalized();
  double lam = 0.0;
  for (int it = 0; it < 50; ++it) {
    Vec w = a.transpose() * (a * v);
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    lam = n;
  }
  return std::sqrt(lam);
}

void append_csv_double(std::string& out, double v, const char* fmt) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), fmt, v);
  out += buf;
}

} // namespace

Method parse_method(std::string_view name) {
  if (name == "okdmd") return Method::okdmd;
  if (name == "kdmd") return Method::kdmd;
  if (name == "lowrank") return Method::lowrank;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::okdmd: return "okdmd";
    case Method::kdmd: return "kdmd";
    case Method::lowrank: return "lowrank";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  if (methods.empty() || kernel_list.empty() || ranks.empty()) {
    throw ConfigError("sweep: methods, kernels and ranks must be non-empty");
  }
  for (const Index k : ranks) {
    if (k < 1) throw ConfigError("sweep: ranks must be >= 1");
  }
  if (dataset_dir.empty() && !generate) {
    throw ConfigError("sweep: either a dataset directory or a generation config is required");
  }
}

double epsilon(const Mat& predictions, const Mat& truth) {
  if (predictions.rows() != truth.rows() || predictions.cols() != truth.cols()) {
    throw InvalidInputError("epsilon: shape mismatch");
  }
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw InvalidInputError("epsilon: truth is identically zero");
  return std::sqrt((predictions - truth).squaredNorm() / denom);
}

ExperimentTable sweep(const ExperimentConfig& cfg) {
  cfg.validate();

  core::SnapshotSet train, test;
  if (!cfg.dataset_dir.empty()) {
    synthgen::Dataset ds = synthgen::load_dataset(cfg.dataset_dir);
    train = std::move(ds.train);
    test = std::move(ds.test);
  } else {
    std::tie(train, test) = synthgen::generate_dataset(cfg.grid, cfg.gen);
  }
  const Index m = train.pair_count();

  std::vector<Index> ranks = cfg.ranks;
  for (Index& k : ranks) k = std::min(k, m);

  ExperimentTable table;
  for (const Method method : cfg.methods) {
    for (const kernels::KernelSpec& kernel : cfg.kernel_list) {
      // K-DMD keeps all m eigen-pairs and truncates at prediction time, so
      // one fit serves every rank; the optimal pipeline depends on k through
      // S and C and is refit per rank.
      baselines::KdmdModel kdmd_model;
      std::string kdmd_status = "ok";
      double kdmd_fit_seconds = 0.0;
      if (method == Method::kdmd) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
          kdmd_model = baselines::kdmd_fit(train, kernel, cfg.rank_tol);
        } catch (const std::exception& e) {
          kdmd_status = status_of(e);
        }
        kdmd_fit_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }

      for (const Index k : ranks) {
        ExperimentRow row;
        row.method = method;
        row.kernel = kernel;
        row.k = k;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          SetPredictions pred_train, pred_test;
          if (method == Method::kdmd) {
            if (kdmd_status != "ok") throw NumericalFailure("kdmd fit failed: " + kdmd_status);
            pred_train = predict_set(train, [&](const Vec& theta, int t) {
              return baselines::kdmd_predict(kdmd_model, theta, t, k);
            });
            if (test.X.size() > 0) {
              pred_test = predict_set(test, [&](const Vec& theta, int t) {
                return baselines::kdmd_predict(kdmd_model, theta, t, k);
              });
            }
          } else {
            const kernels::KernelSpec cell_kernel =
                method == Method::lowrank ? kernels::KernelSpec::linear() : kernel;
            const core::ReducedModel model = core::fit(train, cell_kernel, k, cfg.rank_tol);
            const core::InverseMode mode =
                method == Method::lowrank ? core::InverseMode::closed_form : cfg.inverse_mode;
            const auto predict_one = [&](const Vec& theta, int t) {
              return core::predict(model, theta, t, mode);
            };
            pred_train = predict_set(train, predict_one);
            if (test.X.size() > 0) pred_test = predict_set(test, predict_one);
          }
          row.eps_train = epsilon(pred_train.values, train.Y);
          row.eps_test = test.X.size() > 0 ? epsilon(pred_test.values, test.Y)
                                           : std::numeric_limits<double>::quiet_NaN();
          const Index total = pred_train.total + pred_test.total;
          const Index converged = pred_train.converged + pred_test.converged;
          row.preimage_convergence_rate =
              total > 0 ? static_cast<double>(converged) / static_cast<double>(total) : 0.0;
        } catch (const std::exception& e) {
          row.status = status_of(e);
          row.eps_train = std::numeric_limits<double>::quiet_NaN();
          row.eps_test = std::numeric_limits<double>::quiet_NaN();
          row.preimage_convergence_rate = 0.0;
        }
        if (cfg.wall_timings) {
          const double cell_seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          row.fit_seconds = method == Method::kdmd ? kdmd_fit_seconds : cell_seconds;
        }
        table.rows.push_back(std::move(row));
      }
    }
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream os(cfg.out_dir / "sweep.csv", std::ios::binary);
    if (!os) throw InvalidInputError("cannot write sweep.csv under " + cfg.out_dir.string());
    os << to_csv(table);
    if (cfg.plot) write_svg_plots(cfg.out_dir, table);
  }
  return table;
}

std::string to_csv(const ExperimentTable& table) {
  std::string out = "method,kernel,k,eps_train,eps_test,fit_seconds,preimage_convergence_rate,status\n";
  for (const ExperimentRow& row : table.rows) {
    out += method_name(row.method);
    out += ',';
    out += row.kernel.designation();
    out += ',';
    out += std::to_string(row.k);
    out += ',';
    append_csv_double(out, row.eps_train, "%.12e");
    out += ',';
    append_csv_double(out, row.eps_test, "%.12e");
    out += ',';
    append_csv_double(out, row.fit_seconds, "%.6f");
    out += ',';
    append_csv_double(out, row.preimage_convergence_rate, "%.6f");
    out += ',';
    out += row.status;
    out += '\n';
  }
  return out;
}

namespace {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points; // (k, eps)
};

void write_svg(const std::filesystem::path& file, const std::vector<Series>& series,
               const std::string& title) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};
  const double width = 720, height = 480;
  const double ml = 70, mr = 160, mt = 40, mb = 50;

  double kmin = 1e300, kmax = -1e300, emin = 1e300, emax = -1e300;
  for (const Series& s : series) {
    for (const auto& [k, e] : s.points) {
      kmin = std::min(kmin, k);
      kmax = std::max(kmax, k);
      const double le = std::log10(std::max(e, 1e-16));
      emin = std::min(emin, le);
      emax = std::max(emax, le);
    }
  }
  if (kmax <= kmin) kmax = kmin + 1;
  if (emax <= emin) emax = emin + 1;

  const auto xpix = [&](double k) { return ml + (k - kmin) / (kmax - kmin) * (width - ml - mr); };
  const auto ypix = [&](double e) {
    const double le = std::log10(std::max(e, 1e-16));
    return height - mb - (le - emin) / (emax - emin) * (height - mt - mb);
  };

  std::ofstream os(file, std::ios::binary);
  if (!os) throw InvalidInputError("cannot write " + file.string());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title
     << "</text>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr << "\" y2=\""
     << height - mb << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << height - mb
     << "\" stroke=\"black\"/>\n";
  for (int d = static_cast<int>(std::floor(emin)); d <= static_cast<int>(std::ceil(emax)); ++d) {
    const double y = ypix(std::pow(10.0, d));
    os << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\" font-size=\"11\">1e" << d << "</text>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << width - mr << "\" y2=\"" << y
       << "\" stroke=\"#dddddd\"/>\n";
  }
  os << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 14
     << "\" text-anchor=\"middle\" font-size=\"13\">k</text>\n";

  int idx = 0;
  for (const Series& s : series) {
    const char* color = kColors[idx % 8];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [k, e] : s.points) {
      if (!std::isfinite(e)) continue;
      os << xpix(k) << ',' << ypix(e) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << width - mr + 10 << "\" y=\"" << mt + 16 * idx + 10
       << "\" font-size=\"12\" fill=\"" << color << "\">" << s.label << "</text>\n";
    ++idx;
  }
  os << "</svg>\n";
}

} // namespace

void write_svg_plots(const std::filesystem::path& out_dir, const ExperimentTable& table) {
  std::vector<Series> train_series, test_series;
  for (const ExperimentRow& row : table.rows) {
    if (row.status != "ok") continue;
    const std::string label = method_name(row.method) + " / " + row.kernel.designation();
    const auto find = [&](std::vector<Series>& all) -> Series& {
      for (Series& s : all) {
        if (s.label == label) return s;
      }
      all.push_back({label, {}});
      return all.back();
    };
    find(train_series).points.emplace_back(static_cast<double>(row.k), row.eps_train);
    if (std::isfinite(row.eps_test)) {
      find(test_series).points.emplace_back(static_cast<double>(row.k), row.eps_test);
    }
  }
  write_svg(out_dir / "sweep_train.svg", train_series, "training error vs k");
  if (!test_series.empty()) {
    write_svg(out_dir / "sweep_test.svg", test_series, "testing error vs k");
  }
}

OracleReport oracle_check(const core::SnapshotSet& train, const kernels::KernelSpec& kernel,
                          Index k, double rank_tol) {
  train.validate();
  const std::uint64_t dim = kernels::feature_dim(kernel, train.ambient_dim());
  if (dim > 10'000ULL) {
    throw CapacityError("oracle_check: explicit feature dimension exceeds 1e4");
  }
  const Index d = static_cast<Index>(dim);
  const Index m = train.pair_count();

  Mat phi_x(d, m), phi_y(d, m);
  for (Index j = 0; j < m; ++j) {
    phi_x.col(j) = kernels::feature_map(kernel, train.X.col(j));
    phi_y.col(j) = kernels::feature_map(kernel, train.Y.col(j));
  }

  const core::ReducedModel model = core::fit(train, kernel, k, rank_tol);

  OracleReport report;
  report.k = k;
  report.k_eff = model.k_eff;
  report.feature_dim = dim;

  // Optimal operator in explicit coordinates, factored through the same
  // m x m maps the pipeline uses so both sides share sign conventions.
  const Mat px = linalg::projector_from_gram(model.gram.Gxx, rank_tol);
  const Mat p_hat = phi_y * model.C.transpose(); // B C^T = first-k left singular vectors of Z
  const Mat a_ls = phi_y * linalg::pseudo_inverse(phi_x, rank_tol);
  const Mat a_opt = p_hat * (p_hat.transpose() * a_ls);
  const double a_norm = norm2(a_opt);

  const CMat u_x = (phi_x * model.R.transpose()).cast<Complex>();
  for (Index i = 0; i < model.k_eff; ++i) {
    const CVec xi = u_x * model.Xi.col(i);
    const CVec zeta = p_hat.cast<Complex>() * model.Zeta.col(i);
    const double left = (a_opt.transpose().cast<Complex>() * xi - model.lambda(i) * xi).norm() /
                        std::max(a_norm * xi.norm(), 1e-300);
    const double right = (a_opt.cast<Complex>() * zeta - model.lambda(i) * zeta).norm() /
                         std::max(a_norm * zeta.norm(), 1e-300);
    report.left_residual = std::max(report.left_residual, left);
    report.right_residual = std::max(report.right_residual, right);
  }

  // Prediction equivalence at t = 2 on the training initial conditions. For
  // kernels with an exact inverse, compare states; otherwise compare the
  // feature-space elements B g vs A Psi(theta).
  const bool exact_inverse = kernel.family == kernels::Family::logarithmic ||
                             kernel.family == kernels::Family::linear;
  const bool full_rank_x = linalg::gram_rank(model.gram.Gxx, rank_tol) == m;
  for (Index j = 0; j < m; ++j) {
    const Vec theta = train.X.col(j);
    const Vec eta_explicit = a_opt * phi_x.col(j);
    if (exact_inverse) {
      const Vec pipeline = core::predict(model, theta, 2, core::InverseMode::closed_form).state;
      Vec explicit_state(eta_explicit.size());
      if (kernel.family == kernels::Family::logarithmic) {
        for (Index c = 0; c < eta_explicit.size(); ++c) {
          explicit_state(c) = std::expm1(eta_explicit(c));
        }
      } else {
        explicit_state = eta_explicit;
      }
      const double resid =
          (pipeline - explicit_state).norm() / std::max(explicit_state.norm(), 1e-300);
      report.prediction_residual = std::max(report.prediction_residual, resid);
      if (k >= m && full_rank_x) {
        const Vec eta_ls = a_ls * phi_x.col(j);
        Vec ls_state(eta_ls.size());
        if (kernel.family == kernels::Family::logarithmic) {
          for (Index c = 0; c < eta_ls.size(); ++c) ls_state(c) = std::expm1(eta_ls(c));
        } else {
          ls_state = eta_ls;
        }
        const double r = (pipeline - ls_state).norm() / std::max(ls_state.norm(), 1e-300);
        report.unconstrained_residual = std::max(report.unconstrained_residual, r);
      }
    } else {
      const CVec g = core::coefficient_vector(model, theta, 2);
      const Vec eta_pipeline = phi_y * g.real();
      const double resid =
          (eta_pipeline - eta_explicit).norm() / std::max(eta_explicit.norm(), 1e-300);
      report.prediction_residual = std::max(report.prediction_residual, resid);
    }
  }
  return report;
}

std::string format_report(const OracleReport& report) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific;
  os << "oracle-check: k=" << report.k << " k_eff=" << report.k_eff
     << " feature_dim=" << report.feature_dim << '\n'
     << "  left eigen-identity residual:  " << report.left_residual << '\n'
     << "  right eigen-identity residual: " << report.right_residual << '\n'
     << "  prediction residual:           " << report.prediction_residual << '\n';
  if (report.unconstrained_residual >= 0.0) {
    os << "  unconstrained (k=m) residual:  " << report.unconstrained_residual << '\n';
  }
  return os.str();
}

} // namespace okdmd::harness
