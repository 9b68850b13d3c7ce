// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "okdmd/types.hpp"

namespace okdmd::kernels {

enum class Family { polynomial, gaussian, logarithmic, linear };

/// A kernel family plus its parameters. Carried by value everywhere so that
/// sweeps over kernels are pure data.
struct KernelSpec {
  Family family = Family::linear;
  int gamma = 2;      // polynomial exponent, >= 1
  double sigma = 1.0; // gaussian bandwidth, > 0

  static KernelSpec polynomial(int gamma);
  static KernelSpec gaussian(double sigma);
  static KernelSpec logarithmic();
  static KernelSpec linear();

  /// Parses the CLI designation: "poly:GAMMA", "gauss:SIGMA", "log", "linear".
  static KernelSpec parse(std::string_view designation);
  std::string designation() const;

  void validate() const;
};

/// h(y, z). Symmetric; equals the feature-space inner product for the
/// explicit-map families. The logarithmic family requires all components of
/// both arguments to exceed -1.
double eval(const KernelSpec& kernel, const Vec& y, const Vec& z);

/// Gram block: entry (i, j) = eval(kernel, a_j, b_i), so gram(k, X, Y)
/// realizes Y^T X in feature space. Cost O(cols(A) * cols(B) * rows).
Mat gram(const KernelSpec& kernel, const Mat& a, const Mat& b);

/// Explicit feature map, available for polynomial / logarithmic / linear
/// families only (Gaussian features are infinite-dimensional). Polynomial
/// coordinates carry square-root multinomial weights; guarded by a dimension
/// cap of 1e6.
Vec feature_map(const KernelSpec& kernel, const Vec& y);

/// Dimension of feature_map output for ambient dimension p.
std::uint64_t feature_dim(const KernelSpec& kernel, Index p);

// Evaluation counters, used by the complexity accounting tests. Increments
// are relaxed-atomic so concurrent predicts stay safe.
void reset_counters();
std::uint64_t kernel_eval_count();
std::uint64_t feature_map_count();

} // namespace okdmd::kernels
