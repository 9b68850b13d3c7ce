// SPDX-License-Identifier: Apache-2.0
#include "okdmd/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "okdmd/errors.hpp"
#include "okdmd/matrix_io.hpp"

namespace okdmd::synthgen {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

void GridSpec::validate() const {
  if (n < 2) throw InvalidInputError("GridSpec: n must be >= 2");
}

void GenConfig::validate() const {
  if (N < 1) throw InvalidInputError("GenConfig: N must be >= 1");
  if (T < 2) throw InvalidInputError("GenConfig: T must be >= 2");
  if (!(hurst > 0.0) || !(hurst < 1.0)) {
    throw InvalidInputError("GenConfig: hurst must lie in (0, 1)");
  }
  if (noise_std < 0.0) throw InvalidInputError("GenConfig: noise_std must be >= 0");
  if (!(target_scale > 0.0)) throw InvalidInputError("GenConfig: target_scale must be > 0");
  if (modes < 0) throw InvalidInputError("GenConfig: modes must be >= 0");
}

Rng::Rng(std::uint64_t seed) : state_(seed ^ 0xD1B54A32D192ED03ULL) {
  // Warm up so that trivially related seeds decorrelate.
  splitmix64(state_);
  splitmix64(state_);
}

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::next_unit() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::next_gauss() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  const double u1 = next_unit();
  const double u2 = next_unit();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

std::uint64_t substream(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0xA0761D6478BD642FULL * (stream + 1));
  return splitmix64(s);
}

Mat laplacian(const GridSpec& grid) {
  grid.validate();
  const int n = grid.n;
  const Index p = grid.state_dim();
  Mat L = Mat::Zero(p, p);
  const Index block = static_cast<Index>(n) * n;
  for (int c = 0; c < 2; ++c) {
    const Index off = c * block;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const Index row = off + static_cast<Index>(i) * n + j;
        const int ip = (i + 1) % n, im = (i + n - 1) % n;
        const int jp = (j + 1) % n, jm = (j + n - 1) % n;
        L(row, row) = -4.0;
        L(row, off + static_cast<Index>(ip) * n + j) += 1.0;
        L(row, off + static_cast<Index>(im) * n + j) += 1.0;
        L(row, off + static_cast<Index>(i) * n + jp) += 1.0;
        L(row, off + static_cast<Index>(i) * n + jm) += 1.0;
      }
    }
  }
  return L;
}

Vec quadratic_step(const Vec& x, double alpha, const Mat& L) {
  if (x.size() != L.rows()) {
    throw InvalidInputError("quadratic_step: state and Laplacian dimensions differ");
  }
  return ((x.array() + 1.0).square() + alpha * (L * x).array() - 1.0).matrix();
}

Vec sample_initial(const GridSpec& grid, double hurst, std::uint64_t seed) {
  grid.validate();
  const int n = grid.n;
  const double two_pi = 2.0 * std::numbers::pi;

  // Random stream function in Fourier space. A mode (q1, q2) carries signed
  // frequencies f = q or q - n; its discrete central-difference symbols are
  // sin(2 pi f / n). The stream amplitude divides the velocity symbol out so
  // the modal velocity power is exactly |kappa|^-(2H+2).
  Rng rng(substream(seed, 0x5CA1E));
  std::vector<Complex> psi_hat(static_cast<std::size_t>(n) * n, Complex(0.0, 0.0));
  const auto signed_freq = [n](int q) { return q <= n / 2 ? q : q - n; };
  for (int q1 = 0; q1 < n; ++q1) {
    for (int q2 = 0; q2 < n; ++q2) {
      const int n1 = (n - q1) % n, n2 = (n - q2) % n;
      const bool self_conjugate = n1 == q1 && n2 == q2;
      const bool canonical = (q1 < n1) || (q1 == n1 && q2 < n2);
      if (self_conjugate || !canonical) continue;
      const double g1 = rng.next_gauss();
      const double g2 = rng.next_gauss();
      const double f1 = signed_freq(q1), f2 = signed_freq(q2);
      const double s1 = std::sin(two_pi * f1 / n);
      const double s2 = std::sin(two_pi * f2 / n);
      const double sym2 = s1 * s1 + s2 * s2;
      if (sym2 <= 0.0) continue; // Nyquist line: zero velocity symbol
      const double kappa = two_pi / n * std::hypot(f1, f2);
      const double amplitude = std::pow(kappa, -(hurst + 1.0)) / std::sqrt(sym2);
      const Complex coeff = amplitude * Complex(g1, g2) * std::numbers::sqrt2 / 2.0;
      psi_hat[static_cast<std::size_t>(q1) * n + q2] = coeff;
      psi_hat[static_cast<std::size_t>(n1) * n + n2] = std::conj(coeff);
    }
  }

  // Stream function on the grid: sum over canonical modes of 2 Re(coeff w^k).
  std::vector<Complex> twiddle(static_cast<std::size_t>(n));
  for (int r = 0; r < n; ++r) {
    twiddle[static_cast<std::size_t>(r)] =
        Complex(std::cos(two_pi * r / n), std::sin(two_pi * r / n));
  }
  Mat psi = Mat::Zero(n, n);
  for (int q1 = 0; q1 < n; ++q1) {
    for (int q2 = 0; q2 < n; ++q2) {
      const Complex coeff = psi_hat[static_cast<std::size_t>(q1) * n + q2];
      if (coeff == Complex(0.0, 0.0)) continue;
      const int n1 = (n - q1) % n, n2 = (n - q2) % n;
      if ((q1 > n1) || (q1 == n1 && q2 > n2)) continue; // handled by its partner
      for (int i = 0; i < n; ++i) {
        const int base = (q1 * i) % n;
        for (int j = 0; j < n; ++j) {
          const Complex w = twiddle[static_cast<std::size_t>((base + q2 * j) % n)];
          psi(i, j) += 2.0 * (coeff * w).real();
        }
      }
    }
  }

  // Velocities from the stream function with the same central differences the
  // divergence uses, so the discrete divergence cancels exactly.
  Vec field(grid.state_dim());
  const Index block = static_cast<Index>(n) * n;
  for (int i = 0; i < n; ++i) {
    const int ip = (i + 1) % n, im = (i + n - 1) % n;
    for (int j = 0; j < n; ++j) {
      const int jp = (j + 1) % n, jm = (j + n - 1) % n;
      const Index cell = static_cast<Index>(i) * n + j;
      field(cell) = 0.5 * (psi(ip, j) - psi(im, j));           // u = d psi / d y
      field(block + cell) = -0.5 * (psi(i, jp) - psi(i, jm));  // v = -d psi / d x
    }
  }
  return field;
}

Vec divergence(const GridSpec& grid, const Vec& field) {
  grid.validate();
  if (field.size() != grid.state_dim()) {
    throw InvalidInputError("divergence: field dimension mismatch");
  }
  const int n = grid.n;
  const Index block = static_cast<Index>(n) * n;
  Vec div(block);
  for (int i = 0; i < n; ++i) {
    const int ip = (i + 1) % n, im = (i + n - 1) % n;
    for (int j = 0; j < n; ++j) {
      const int jp = (j + 1) % n, jm = (j + n - 1) % n;
      const Index cell = static_cast<Index>(i) * n + j;
      const double du = 0.5 * (field(static_cast<Index>(i) * n + jp) -
                               field(static_cast<Index>(i) * n + jm));
      const double dv = 0.5 * (field(block + static_cast<Index>(ip) * n + j) -
                               field(block + static_cast<Index>(im) * n + j));
      div(cell) = du + dv;
    }
  }
  return div;
}

namespace {

// Raw (unscaled) initial conditions for one set.
std::vector<Vec> draw_initials(const GridSpec& grid, const GenConfig& cfg,
                               std::uint64_t stream_tag) {
  std::vector<Vec> initials;
  initials.reserve(static_cast<std::size_t>(cfg.N));
  if (cfg.modes > 0) {
    // Fixed family of unit-norm basis fields shared by the train and test
    // sets; only the combination coefficients differ per sample.
    std::vector<Vec> basis;
    basis.reserve(static_cast<std::size_t>(cfg.modes));
    for (int l = 0; l < cfg.modes; ++l) {
      Vec b = sample_initial(grid, cfg.hurst, substream(cfg.seed, 0xBA5E + l));
      const double nrm = b.norm();
      if (nrm == 0.0) throw GenerationError("generate_dataset: zero basis field");
      basis.push_back(b / nrm);
    }
    Rng coeff_rng(substream(cfg.seed, stream_tag));
    for (int j = 0; j < cfg.N; ++j) {
      Vec theta = Vec::Zero(grid.state_dim());
      for (int l = 0; l < cfg.modes; ++l) {
        theta += coeff_rng.next_gauss() * basis[static_cast<std::size_t>(l)];
      }
      initials.push_back(std::move(theta));
    }
  } else {
    for (int j = 0; j < cfg.N; ++j) {
      initials.push_back(sample_initial(
          grid, cfg.hurst, substream(cfg.seed, stream_tag * 0x10000 + static_cast<std::uint64_t>(j))));
    }
  }
  return initials;
}

double median_second_norm(const std::vector<Vec>& initials, double scale, double alpha,
                          const Mat& L) {
  std::vector<double> norms;
  norms.reserve(initials.size());
  for (const Vec& theta : initials) {
    norms.push_back(quadratic_step(scale * theta, alpha, L).norm());
  }
  return median_of(std::move(norms));
}

// One global scalar so the median of |x_2| hits the target within 5%.
double calibrate_scale(const std::vector<Vec>& initials, const GenConfig& cfg, const Mat& L) {
  const double target = cfg.target_scale;
  double hi = 1.0;
  double f_hi = median_second_norm(initials, hi, cfg.alpha, L);
  int expand = 0;
  while (f_hi < target) {
    hi *= 2.0;
    f_hi = median_second_norm(initials, hi, cfg.alpha, L);
    if (++expand > 200 || !std::isfinite(f_hi)) {
      throw GenerationError("generate_dataset: cannot bracket the rescaling factor");
    }
  }
  double lo = 0.0;
  double s = hi;
  double f = f_hi;
  for (int iter = 0; iter < 200 && std::abs(f - target) > 0.01 * target; ++iter) {
    s = 0.5 * (lo + hi);
    f = median_second_norm(initials, s, cfg.alpha, L);
    (f < target ? lo : hi) = s;
  }
  if (std::abs(f - target) > 0.05 * target) {
    throw GenerationError("generate_dataset: rescaling bisection failed (non-monotone regime)");
  }
  return s;
}

core::SnapshotSet roll_out(const GridSpec& grid, const GenConfig& cfg,
                           const std::vector<Vec>& initials, double scale, const Mat& L,
                           std::uint64_t noise_tag) {
  core::SnapshotSet set;
  set.N = cfg.N;
  set.T = cfg.T;
  const Index m = static_cast<Index>(cfg.N) * (cfg.T - 1);
  set.X = Mat(grid.state_dim(), m);
  set.Y = Mat(grid.state_dim(), m);
  Rng noise_rng(substream(cfg.seed, noise_tag));
  for (int i = 0; i < cfg.N; ++i) {
    Vec state = scale * initials[static_cast<std::size_t>(i)];
    if (cfg.noise_std > 0.0) {
      for (Index c = 0; c < state.size(); ++c) {
        state(c) += cfg.noise_std * noise_rng.next_gauss();
      }
    }
    for (int t = 1; t < cfg.T; ++t) {
      const Index col = static_cast<Index>(cfg.T - 1) * i + (t - 1);
      Vec next = quadratic_step(state, cfg.alpha, L);
      set.X.col(col) = state;
      set.Y.col(col) = next;
      state = std::move(next);
    }
  }
  set.validate();
  return set;
}

} // namespace

std::pair<core::SnapshotSet, core::SnapshotSet> generate_dataset(const GridSpec& grid,
                                                                 const GenConfig& cfg) {
  grid.validate();
  cfg.validate();
  const Mat L = laplacian(grid);

  const std::vector<Vec> train_init = draw_initials(grid, cfg, 0x7121A);
  const std::vector<Vec> test_init = draw_initials(grid, cfg, 0x7E57);

  const double scale = calibrate_scale(train_init, cfg, L);
  core::SnapshotSet train = roll_out(grid, cfg, train_init, scale, L, 0x4015E1);
  core::SnapshotSet test = roll_out(grid, cfg, test_init, scale, L, 0x4015E2);
  return {std::move(train), std::move(test)};
}

core::MetaMap make_meta(const GridSpec& grid, const GenConfig& cfg) {
  core::MetaMap meta;
  const auto num = [](double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  };
  meta["n"] = std::to_string(grid.n);
  meta["N"] = std::to_string(cfg.N);
  meta["T"] = std::to_string(cfg.T);
  meta["alpha"] = num(cfg.alpha);
  meta["hurst"] = num(cfg.hurst);
  meta["noise_std"] = num(cfg.noise_std);
  meta["target_scale"] = num(cfg.target_scale);
  meta["seed"] = std::to_string(cfg.seed);
  meta["modes"] = std::to_string(cfg.modes);
  return meta;
}

void write_dataset(const std::filesystem::path& dir, const core::SnapshotSet& train,
                   const core::SnapshotSet& test, const core::MetaMap& meta) {
  std::filesystem::create_directories(dir);
  linalg::save_matrix(dir / "X.mat", train.X);
  linalg::save_matrix(dir / "Y.mat", train.Y);
  if (test.X.size() > 0) {
    linalg::save_matrix(dir / "X_test.mat", test.X);
    linalg::save_matrix(dir / "Y_test.mat", test.Y);
  }
  core::save_meta(dir / "gen.meta", meta);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  ds.train.X = linalg::load_real_matrix(dir / "X.mat");
  ds.train.Y = linalg::load_real_matrix(dir / "Y.mat");
  if (std::filesystem::exists(dir / "gen.meta")) {
    ds.meta = core::load_meta(dir / "gen.meta");
    auto it_n = ds.meta.find("N");
    auto it_t = ds.meta.find("T");
    if (it_n != ds.meta.end()) ds.train.N = std::stoi(it_n->second);
    if (it_t != ds.meta.end()) ds.train.T = std::stoi(it_t->second);
  }
  ds.train.validate();
  if (std::filesystem::exists(dir / "X_test.mat")) {
    ds.test.X = linalg::load_real_matrix(dir / "X_test.mat");
    ds.test.Y = linalg::load_real_matrix(dir / "Y_test.mat");
    ds.test.N = ds.train.N;
    ds.test.T = ds.train.T;
    ds.test.validate();
  }
  return ds;
}

} // namespace okdmd::synthgen
