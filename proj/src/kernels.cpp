// SPDX-License-Identifier: Apache-2.0
#include "okdmd/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <vector>

#include "okdmd/errors.hpp"

namespace okdmd::kernels {

namespace {

std::atomic<std::uint64_t> g_eval_count{0};
std::atomic<std::uint64_t> g_feature_count{0};

void check_log_domain(const Vec& v, const char* what) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!(v(i) > -1.0)) {
      std::ostringstream msg;
      msg << "logarithmic kernel: component " << i << " of " << what
          << " is " << v(i) << " (must be > -1)";
      throw KernelDomainError(msg.str());
    }
  }
}

double eval_unchecked(const KernelSpec& k, const Vec& y, const Vec& z) {
  switch (k.family) {
    case Family::polynomial:
      return std::pow(1.0 + y.dot(z), k.gamma);
    case Family::gaussian:
      return std::exp(-(y - z).squaredNorm() / (2.0 * k.sigma * k.sigma));
    case Family::logarithmic: {
      check_log_domain(y, "first argument");
      check_log_domain(z, "second argument");
      double acc = 0.0;
      for (Index i = 0; i < y.size(); ++i) {
        acc += std::log1p(y(i)) * std::log1p(z(i));
      }
      return acc;
    }
    case Family::linear:
      return y.dot(z);
  }
  throw InvalidInputError("eval: unknown kernel family");
}

// Multi-index enumeration for the polynomial feature map. Total degree
// ascending; within a degree the mixed terms come before the pure powers
// (max exponent ascending, then lexicographically descending), matching the
// usual way the binomial expansion is written out.
void enumerate_multi_indices(Index p, int degree, std::vector<std::vector<int>>& out) {
  std::vector<int> current(static_cast<std::size_t>(p), 0);
  // Recursive enumeration of all multi-indices with |alpha| == degree.
  std::vector<std::vector<int>> all;
  auto rec = [&](auto&& self, Index pos, int remaining) -> void {
    if (pos == p - 1) {
      current[static_cast<std::size_t>(pos)] = remaining;
      all.push_back(current);
      return;
    }
    for (int v = remaining; v >= 0; --v) {
      current[static_cast<std::size_t>(pos)] = v;
      self(self, pos + 1, remaining - v);
    }
  };
  if (p == 0) return;
  rec(rec, 0, degree);
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    const int ma = *std::max_element(a.begin(), a.end());
    const int mb = *std::max_element(b.begin(), b.end());
    if (ma != mb) return ma < mb;
    return a > b; // lexicographically descending
  });
  for (auto& idx : all) out.push_back(std::move(idx));
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

} // namespace

KernelSpec KernelSpec::polynomial(int gamma) { return {Family::polynomial, gamma, 1.0}; }
KernelSpec KernelSpec::gaussian(double sigma) { return {Family::gaussian, 2, sigma}; }
KernelSpec KernelSpec::logarithmic() { return {Family::logarithmic, 2, 1.0}; }
KernelSpec KernelSpec::linear() { return {Family::linear, 2, 1.0}; }

void KernelSpec::validate() const {
  if (family == Family::polynomial && gamma < 1) {
    throw InvalidInputError("polynomial kernel: gamma must be >= 1");
  }
  if (family == Family::gaussian && !(sigma > 0.0)) {
    throw InvalidInputError("gaussian kernel: sigma must be > 0");
  }
}

KernelSpec KernelSpec::parse(std::string_view s) {
  if (s == "log") return logarithmic();
  if (s == "linear") return linear();
  if (s.rfind("poly:", 0) == 0) {
    int gamma = 0;
    const auto body = s.substr(5);
    auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), gamma);
    if (ec != std::errc{} || p != body.data() + body.size() || gamma < 1) {
      throw ConfigError("bad kernel designation '" + std::string(s) + "'");
    }
    return polynomial(gamma);
  }
  if (s.rfind("gauss:", 0) == 0) {
    const auto body = std::string(s.substr(6));
    char* end = nullptr;
    const double sigma = std::strtod(body.c_str(), &end);
    if (end != body.c_str() + body.size() || !(sigma > 0.0)) {
      throw ConfigError("bad kernel designation '" + std::string(s) + "'");
    }
    return gaussian(sigma);
  }
  throw ConfigError("unknown kernel designation '" + std::string(s) + "'");
}

std::string KernelSpec::designation() const {
  switch (family) {
    case Family::polynomial:
      return "poly:" + std::to_string(gamma);
    case Family::gaussian: {
      std::ostringstream os;
      os << "gauss:" << sigma;
      return os.str();
    }
    case Family::logarithmic:
      return "log";
    case Family::linear:
      return "linear";
  }
  return "?";
}

double eval(const KernelSpec& kernel, const Vec& y, const Vec& z) {
  if (y.size() != z.size()) {
    throw InvalidInputError("eval: argument dimensions differ");
  }
  kernel.validate();
  g_eval_count.fetch_add(1, std::memory_order_relaxed);
  return eval_unchecked(kernel, y, z);
}

Mat gram(const KernelSpec& kernel, const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) {
    throw InvalidInputError("gram: column dimensions differ");
  }
  Mat g(b.cols(), a.cols());
  for (Index i = 0; i < b.cols(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      try {
        g(i, j) = eval(kernel, a.col(j), b.col(i));
      } catch (const KernelDomainError& e) {
        std::ostringstream msg;
        msg << e.what() << " [gram entry (" << i << ", " << j << ")]";
        throw KernelDomainError(msg.str());
      }
    }
  }
  return g;
}

std::uint64_t feature_dim(const KernelSpec& kernel, Index p) {
  switch (kernel.family) {
    case Family::linear:
    case Family::logarithmic:
      return static_cast<std::uint64_t>(p);
    case Family::polynomial: {
      // C(p + gamma, gamma), saturating.
      long double dim = 1.0L;
      for (int i = 1; i <= kernel.gamma; ++i) {
        dim *= static_cast<long double>(p + i) / i;
        if (dim > 1e18L) return UINT64_MAX;
      }
      return static_cast<std::uint64_t>(dim + 0.5L);
    }
    case Family::gaussian:
      return UINT64_MAX;
  }
  return UINT64_MAX;
}

Vec feature_map(const KernelSpec& kernel, const Vec& y) {
  kernel.validate();
  g_feature_count.fetch_add(1, std::memory_order_relaxed);
  switch (kernel.family) {
    case Family::linear:
      return y;
    case Family::logarithmic: {
      check_log_domain(y, "argument");
      Vec out(y.size());
      for (Index i = 0; i < y.size(); ++i) out(i) = std::log1p(y(i));
      return out;
    }
    case Family::polynomial: {
      const std::uint64_t dim = feature_dim(kernel, y.size());
      if (dim > 1'000'000ULL) {
        throw CapacityError("polynomial feature map dimension exceeds 1e6");
      }
      std::vector<std::vector<int>> indices;
      for (int d = 0; d <= kernel.gamma; ++d) {
        enumerate_multi_indices(y.size(), d, indices);
      }
      Vec out(static_cast<Index>(indices.size()));
      const double gfact = factorial(kernel.gamma);
      for (std::size_t n = 0; n < indices.size(); ++n) {
        const auto& alpha = indices[n];
        int total = 0;
        double denom = 1.0;
        double mono = 1.0;
        for (Index i = 0; i < y.size(); ++i) {
          const int a = alpha[static_cast<std::size_t>(i)];
          total += a;
          denom *= factorial(a);
          mono *= std::pow(y(i), a);
        }
        denom *= factorial(kernel.gamma - total); // exponent of the constant 1
        out(static_cast<Index>(n)) = std::sqrt(gfact / denom) * mono;
      }
      return out;
    }
    case Family::gaussian:
      throw CapabilityError("gaussian kernel has no finite-dimensional feature map");
  }
  throw InvalidInputError("feature_map: unknown kernel family");
}

void reset_counters() {
  g_eval_count.store(0, std::memory_order_relaxed);
  g_feature_count.store(0, std::memory_order_relaxed);
}

std::uint64_t kernel_eval_count() { return g_eval_count.load(std::memory_order_relaxed); }
std::uint64_t feature_map_count() { return g_feature_count.load(std::memory_order_relaxed); }

} // namespace okdmd::kernels
