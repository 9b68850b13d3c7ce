// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "okdmd/errors.hpp"
#include "okdmd/synthgen.hpp"
#include "support/test_utils.hpp"

using namespace okdmd;
using namespace okdmd::synthgen;

namespace {

// Scalar re-implementation of the quadratic step, element by element.
Vec quadratic_step_scalar(const Vec& x, double alpha, const Mat& L) {
  Vec out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    double lap = 0.0;
    for (Index j = 0; j < x.size(); ++j) lap += L(i, j) * x(j);
    const double v = x(i);
    out(i) = (v + 1.0) * (v + 1.0) + alpha * lap - 1.0;
  }
  return out;
}

double median_norm_x2(const core::SnapshotSet& set) {
  std::vector<double> norms;
  const Index steps = set.T - 1;
  for (int i = 0; i < set.N; ++i) {
    norms.push_back(set.Y.col(steps * i).norm());
  }
  std::sort(norms.begin(), norms.end());
  const std::size_t n = norms.size();
  return n % 2 == 1 ? norms[n / 2] : 0.5 * (norms[n / 2 - 1] + norms[n / 2]);
}

} // namespace

TEST_CASE("laplacian kills constant fields and is symmetric") {
  const GridSpec grid{4};
  const Mat L = laplacian(grid);
  CHECK((L * Vec::Ones(grid.state_dim())).norm() == 0.0);
  CHECK((L - L.transpose()).norm() == 0.0);
  CHECK(L.rowwise().sum().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("laplacian eigenvalue on a single Fourier mode") {
  const int n = 8;
  const GridSpec grid{n};
  const Mat L = laplacian(grid);
  const int k1 = 2, k2 = 3;
  Vec mode = Vec::Zero(grid.state_dim());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      mode(static_cast<Index>(i) * n + j) =
          std::cos(2.0 * std::numbers::pi * (k1 * i + k2 * j) / n);
    }
  }
  const double s1 = std::sin(std::numbers::pi * k1 / n);
  const double s2 = std::sin(std::numbers::pi * k2 / n);
  const double expected = -4.0 * (s1 * s1 + s2 * s2);
  CHECK((L * mode - expected * mode).norm() <= 1e-12 * mode.norm());
}

TEST_CASE("quadratic_step fixed point and scalar cases") {
  const GridSpec grid{3};
  const Mat L = laplacian(grid);
  CHECK(quadratic_step(Vec::Zero(grid.state_dim()), 0.5, L).norm() == 0.0);

  // alpha = 0, one slot at 0.1: (1.1)^2 - 1 = 0.21.
  Vec x = Vec::Zero(grid.state_dim());
  x(4) = 0.1;
  const Vec next = quadratic_step(x, 0.0, L);
  CHECK(next(4) == doctest::Approx(0.21).epsilon(1e-15));

  // Constant field: the Laplacian term vanishes for any alpha.
  const Vec c = Vec::Constant(grid.state_dim(), 0.3);
  const Vec stepped = quadratic_step(c, 0.7, L);
  CHECK((stepped - Vec::Constant(grid.state_dim(), 1.3 * 1.3 - 1.0)).norm() <= 1e-14);
}

TEST_CASE("quadratic_step matches an independent scalar re-implementation") {
  const GridSpec grid{4};
  const Mat L = laplacian(grid);
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Vec x = testutil::random_vector(grid.state_dim(), 60 + seed) * 0.3;
    const Vec a = quadratic_step(x, 0.5, L);
    const Vec b = quadratic_step_scalar(x, 0.5, L);
    CHECK((a - b).norm() <= 1e-14 * std::max(1.0, b.norm()));
  }
}

TEST_CASE("sample_initial is deterministic per seed") {
  const GridSpec grid{8};
  const Vec a = sample_initial(grid, 1.0 / 3.0, 42);
  const Vec b = sample_initial(grid, 1.0 / 3.0, 42);
  const Vec c = sample_initial(grid, 1.0 / 3.0, 43);
  CHECK((a - b).norm() == 0.0);
  CHECK((a - c).norm() > 0.0);
}

TEST_CASE("sample_initial fields are discretely divergence-free") {
  for (const int n : {6, 8, 16}) {
    const GridSpec grid{n};
    const Vec field = sample_initial(grid, 1.0 / 3.0, 7);
    CHECK(divergence(grid, field).norm() <= 1e-10 * field.norm());
  }
}

TEST_CASE("sample_initial spectral slope matches -(2H+2)") {
  const int n = 64;
  const GridSpec grid{n};
  const double hurst = 1.0 / 3.0;
  const Index block = static_cast<Index>(n) * n;

  // Ensemble-averaged modal power, then a least-squares log-log fit over the
  // resolved wavenumbers.
  std::vector<double> power(static_cast<std::size_t>(n) * n, 0.0);
  const int ensemble = 20;
  std::vector<Complex> twiddle(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    const double angle = -2.0 * std::numbers::pi * r / n;
    twiddle[static_cast<std::size_t>(r)] = Complex(std::cos(angle), std::sin(angle));
  }
  // 2D DFT as a row pass followed by a column pass.
  const auto dft2 = [&](const Eigen::Map<const Mat>& grid_vals) {
    Eigen::MatrixXcd rows(n, n);
    for (int i = 0; i < n; ++i) {
      for (int q2 = 0; q2 < n; ++q2) {
        Complex acc(0.0, 0.0);
        for (int j = 0; j < n; ++j) {
          acc += grid_vals(i, j) * twiddle[static_cast<std::size_t>((q2 * j) % n)];
        }
        rows(i, q2) = acc;
      }
    }
    Eigen::MatrixXcd full(n, n);
    for (int q1 = 0; q1 < n; ++q1) {
      for (int q2 = 0; q2 < n; ++q2) {
        Complex acc(0.0, 0.0);
        for (int i = 0; i < n; ++i) {
          acc += rows(i, q2) * twiddle[static_cast<std::size_t>((q1 * i) % n)];
        }
        full(q1, q2) = acc;
      }
    }
    return full;
  };
  for (int e = 0; e < ensemble; ++e) {
    const Vec field = sample_initial(grid, hurst, 1000 + e);
    const Eigen::Map<const Mat> u(field.data(), n, n); // column-major view is a relabeling
    const Eigen::Map<const Mat> v(field.data() + block, n, n);
    const Eigen::MatrixXcd u_hat = dft2(u);
    const Eigen::MatrixXcd v_hat = dft2(v);
    for (int q1 = 0; q1 < n; ++q1) {
      for (int q2 = 0; q2 < n; ++q2) {
        power[static_cast<std::size_t>(q1) * n + q2] +=
            std::norm(u_hat(q1, q2)) + std::norm(v_hat(q1, q2));
      }
    }
  }

  // Fit log(power) vs log(kappa) over modes away from zero and Nyquist.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (int q1 = 0; q1 < n; ++q1) {
    for (int q2 = 0; q2 < n; ++q2) {
      const int f1 = q1 <= n / 2 ? q1 : q1 - n;
      const int f2 = q2 <= n / 2 ? q2 : q2 - n;
      const int fmax = std::max(std::abs(f1), std::abs(f2));
      if (fmax == 0 || fmax >= n / 2 - 1) continue;
      const double p = power[static_cast<std::size_t>(q1) * n + q2];
      if (p <= 0.0) continue;
      const double lx = std::log(2.0 * std::numbers::pi / n * std::hypot(f1, f2));
      const double ly = std::log(p / ensemble);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++count;
    }
  }
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  const double expected = -(2.0 * hurst + 2.0);
  CHECK(std::abs(slope - expected) <= 0.3);
}

TEST_CASE("generate_dataset indexing for T = 2 and determinism") {
  const GridSpec grid{4};
  GenConfig cfg;
  cfg.N = 6;
  cfg.T = 2;
  cfg.noise_std = 0.0;
  cfg.seed = 5;
  const auto [train, test] = generate_dataset(grid, cfg);
  CHECK(train.pair_count() == 6);
  CHECK(train.N == 6);
  const Mat L = laplacian(grid);
  for (Index j = 0; j < 6; ++j) {
    CHECK((train.Y.col(j) - quadratic_step(train.X.col(j), cfg.alpha, L)).norm() <=
          1e-12 * std::max(1.0, train.Y.col(j).norm()));
  }

  const auto [train2, test2] = generate_dataset(grid, cfg);
  CHECK((train.X - train2.X).norm() == 0.0);
  CHECK((train.Y - train2.Y).norm() == 0.0);
  CHECK((test.X - test2.X).norm() == 0.0);

  // Train and test draw from disjoint streams.
  CHECK((train.X - test.X).norm() > 0.0);
}

TEST_CASE("generate_dataset trajectory indexing for T = 3") {
  const GridSpec grid{3};
  GenConfig cfg;
  cfg.N = 4;
  cfg.T = 3;
  cfg.seed = 8;
  const auto [train, test] = generate_dataset(grid, cfg);
  CHECK(train.pair_count() == 8);
  const Mat L = laplacian(grid);
  for (int i = 0; i < 4; ++i) {
    // Y of the first pair is X of the second pair within a trajectory.
    CHECK((train.Y.col(2 * i) - train.X.col(2 * i + 1)).norm() == 0.0);
    CHECK((train.Y.col(2 * i + 1) - quadratic_step(train.X.col(2 * i + 1), cfg.alpha, L)).norm() <=
          1e-12);
  }
}

TEST_CASE("generate_dataset calibrates the median of |x_2| to the target") {
  const GridSpec grid{6};
  GenConfig cfg;
  cfg.N = 10;
  cfg.seed = 12;
  cfg.target_scale = 1e-2;
  const auto [train, test] = generate_dataset(grid, cfg);
  const double med = median_norm_x2(train);
  CHECK(med >= 0.95 * cfg.target_scale);
  CHECK(med <= 1.05 * cfg.target_scale);
}

TEST_CASE("generated data stays in the small-norm regime") {
  const GridSpec grid{6};
  GenConfig cfg;
  cfg.N = 12;
  cfg.seed = 13;
  const auto [train, test] = generate_dataset(grid, cfg);
  double max_y = 0.0;
  for (Index j = 0; j < train.pair_count(); ++j) {
    max_y = std::max(max_y, train.Y.col(j).norm());
  }
  CHECK(max_y <= 10.0 * cfg.target_scale);
}

TEST_CASE("the modes knob limits the intrinsic dimension of the initial conditions") {
  const GridSpec grid{6};
  GenConfig cfg;
  cfg.N = 15;
  cfg.seed = 14;
  cfg.modes = 5;
  cfg.noise_std = 0.0;
  const auto [train, test] = generate_dataset(grid, cfg);
  const Eigen::JacobiSVD<Mat> svd(train.X, Eigen::ComputeThinU);
  const Vec& s = svd.singularValues();
  CHECK(s(4) > 1e-12 * s(0));
  CHECK(s(5) <= 1e-12 * s(0)); // everything beyond the basis size is numerically zero
  // Both sets share the basis: the test columns lie in the training span.
  const Mat span = svd.matrixU().leftCols(5);
  const Mat residual = test.X - span * (span.transpose() * test.X);
  CHECK(residual.norm() <= 1e-10 * test.X.norm());
}

TEST_CASE("dataset directory round-trip") {
  const GridSpec grid{4};
  GenConfig cfg;
  cfg.N = 5;
  cfg.seed = 21;
  const auto [train, test] = generate_dataset(grid, cfg);
  testutil::TempDir tmp("synthgen_ds");
  write_dataset(tmp.path(), train, test, make_meta(grid, cfg));
  const Dataset ds = load_dataset(tmp.path());
  CHECK((ds.train.X - train.X).norm() == 0.0);
  CHECK((ds.test.Y - test.Y).norm() == 0.0);
  CHECK(ds.train.N == 5);
  CHECK(ds.train.T == 2);
  CHECK(ds.meta.at("n") == "4");
  CHECK(ds.meta.at("modes") == "0");
}

TEST_CASE("config validation") {
  const GridSpec bad_grid{1};
  CHECK_THROWS_AS(bad_grid.validate(), InvalidInputError);
  GenConfig cfg;
  cfg.T = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  GenConfig cfg2;
  cfg2.hurst = 1.5;
  CHECK_THROWS_AS(cfg2.validate(), InvalidInputError);
}

TEST_CASE("rng substreams are deterministic and decorrelated") {
  Rng a(substream(7, 1));
  Rng b(substream(7, 1));
  Rng c(substream(7, 2));
  const double va = a.next_gauss();
  CHECK(va == b.next_gauss());
  CHECK(va != c.next_gauss());
}
