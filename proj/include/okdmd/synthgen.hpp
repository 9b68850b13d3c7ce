// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include "okdmd/snapshots.hpp"
#include "okdmd/types.hpp"

namespace okdmd::synthgen {

/// Two velocity components on an n x n periodic grid; state dimension
/// p = 2 n^2. Component c of a state vector lives at c*n*n + i*n + j for row
/// i and column j; component 0 is the velocity along columns, component 1
/// along rows.
struct GridSpec {
  int n = 8;

  Index state_dim() const { return 2 * static_cast<Index>(n) * n; }
  void validate() const;
};

struct GenConfig {
  int N = 20;                 // trajectory count
  int T = 2;                  // trajectory length
  double alpha = 0.5;         // diffusion coefficient
  double hurst = 1.0 / 3.0;   // spectral exponent of the initial fields
  double noise_std = 1e-6;    // absolute white-noise level on initial states
  double target_scale = 1e-2; // calibrated median of |x_2|
  std::uint64_t seed = 1;
  int modes = 0; // > 0 restricts initial conditions to that many basis fields

  void validate() const;
};

/// Deterministic generator independent of the standard library's
/// distributions, so datasets are bitwise reproducible.
class Rng {
public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  double next_unit();  // (0, 1]
  double next_gauss(); // standard normal

private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent substream seed.
std::uint64_t substream(std::uint64_t seed, std::uint64_t stream);

/// Second-order finite-difference Laplacian applied to each velocity
/// component with periodic boundaries; symmetric with zero row sums.
Mat laplacian(const GridSpec& grid);

/// One step of the quadratic diffusion map: (x + 1)^2 + alpha L x - 1 with
/// the square taken component-wise.
Vec quadratic_step(const Vec& x, double alpha, const Mat& L);

/// Divergence-free random field with isotropic power spectrum
/// ~ |kappa|^-(2 hurst + 2), synthesized from a random stream function.
/// Deterministic per seed.
Vec sample_initial(const GridSpec& grid, double hurst, std::uint64_t seed);

/// Discrete divergence (periodic central differences) of a state vector;
/// zero to machine precision for sample_initial fields.
Vec divergence(const GridSpec& grid, const Vec& field);

/// Training and test snapshot sets: independent initial conditions, one
/// global rescale so the median of |x_2| matches target_scale, white noise,
/// quadratic rollouts.
std::pair<core::SnapshotSet, core::SnapshotSet> generate_dataset(const GridSpec& grid,
                                                                 const GenConfig& cfg);

struct Dataset {
  core::SnapshotSet train;
  core::SnapshotSet test; // empty X when the directory has no test split
  core::MetaMap meta;
};

void write_dataset(const std::filesystem::path& dir, const core::SnapshotSet& train,
                   const core::SnapshotSet& test, const core::MetaMap& meta);
Dataset load_dataset(const std::filesystem::path& dir);

core::MetaMap make_meta(const GridSpec& grid, const GenConfig& cfg);

} // namespace okdmd::synthgen
