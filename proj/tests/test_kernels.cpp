// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "okdmd/errors.hpp"
#include "okdmd/kernels.hpp"
#include "support/test_utils.hpp"

using namespace okdmd;
using namespace okdmd::kernels;
using testutil::random_matrix;
using testutil::random_vector;

TEST_CASE("polynomial kernel footnote case: eval, feature map and their agreement") {
  const KernelSpec k = KernelSpec::polynomial(2);
  Vec y(2), z(2);
  y << 1.0, 2.0;
  z << 3.0, 4.0;
  CHECK(eval(k, y, z) == doctest::Approx(144.0).epsilon(1e-15)); // (1 + 11)^2

  const Vec phi = feature_map(k, y);
  Vec expected(6);
  const double s2 = std::sqrt(2.0);
  expected << 1.0, s2 * 1.0, s2 * 2.0, s2 * 2.0, 1.0, 4.0;
  CHECK(phi.size() == 6);
  CHECK((phi - expected).norm() < 1e-14);

  const Vec phi_z = feature_map(k, z);
  CHECK(std::abs(phi.dot(phi_z) - eval(k, y, z)) <= 1e-12 * 144.0);
}

TEST_CASE("gaussian kernel is 1 on the diagonal") {
  const KernelSpec k = KernelSpec::gaussian(0.7);
  const Vec y = random_vector(5, 3u);
  CHECK(eval(k, y, y) == 1.0);
}

TEST_CASE("logarithmic kernel: log(e) = 1") {
  const KernelSpec k = KernelSpec::logarithmic();
  Vec y(1);
  y << std::exp(1.0) - 1.0;
  CHECK(eval(k, y, y) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("logarithmic kernel rejects components <= -1") {
  const KernelSpec k = KernelSpec::logarithmic();
  Vec y(2), z(2);
  y << 0.5, -1.5;
  z << 0.0, 0.0;
  CHECK_THROWS_AS(eval(k, y, z), KernelDomainError);
}

TEST_CASE("kernel symmetry on random pairs") {
  for (const KernelSpec& k : {KernelSpec::polynomial(3), KernelSpec::gaussian(2.0),
                              KernelSpec::logarithmic(), KernelSpec::linear()}) {
    for (unsigned seed = 0; seed < 20; ++seed) {
      Vec y = random_vector(6, 100 + seed);
      Vec z = random_vector(6, 200 + seed);
      if (k.family == Family::logarithmic) {
        y = y.cwiseAbs();
        z = z.cwiseAbs();
      }
      CHECK(eval(k, y, z) == eval(k, z, y));
    }
  }
}

TEST_CASE("linear gram is the plain matrix product") {
  const Mat a = random_matrix(5, 3, 7u);
  const Mat b = random_matrix(5, 4, 8u);
  const Mat g = gram(KernelSpec::linear(), a, b); // realizes B^T A
  CHECK((g - b.transpose() * a).norm() <= 1e-13 * g.norm());
  CHECK(g.rows() == 4);
  CHECK(g.cols() == 3);
}

TEST_CASE("gram(k, X, X) is symmetric PSD within tolerance") {
  for (const KernelSpec& k : {KernelSpec::polynomial(2), KernelSpec::gaussian(1.5),
                              KernelSpec::logarithmic(), KernelSpec::linear()}) {
    Mat x = random_matrix(6, 5, 17u) * 0.3;
    if (k.family == Family::logarithmic) x = x.cwiseAbs();
    const Mat g = gram(k, x, x);
    CHECK((g - g.transpose()).norm() <= 1e-12 * g.norm());
    const Eigen::SelfAdjointEigenSolver<Mat> es(g);
    CHECK(es.eigenvalues()(0) >= -1e-10 * es.eigenvalues()(es.eigenvalues().size() - 1));
  }
}

TEST_CASE("polynomial gram matches the explicit feature-map product") {
  const KernelSpec k = KernelSpec::polynomial(2);
  const Mat a = random_matrix(2, 3, 27u);
  const Mat b = random_matrix(2, 2, 28u);
  Mat phi_a(6, 3), phi_b(6, 2);
  for (Index j = 0; j < 3; ++j) phi_a.col(j) = feature_map(k, a.col(j));
  for (Index j = 0; j < 2; ++j) phi_b.col(j) = feature_map(k, b.col(j));
  const Mat g = gram(k, a, b);
  CHECK((g - phi_b.transpose() * phi_a).norm() <= 1e-12 * g.norm());
}

TEST_CASE("gram propagates domain errors with the offending entry") {
  Mat x(1, 2);
  x << 0.5, -2.0;
  try {
    gram(KernelSpec::logarithmic(), x, x);
    FAIL("expected a domain error");
  } catch (const KernelDomainError& e) {
    CHECK(std::string(e.what()).find("gram entry") != std::string::npos);
  }
}

TEST_CASE("feature_map trivial families") {
  const Vec y = random_vector(4, 5u);
  CHECK((feature_map(KernelSpec::linear(), y) - y).norm() == 0.0);
  CHECK(feature_map(KernelSpec::logarithmic(), Vec::Zero(5)).norm() == 0.0);
}

TEST_CASE("feature_map capability and capacity guards") {
  CHECK_THROWS_AS(feature_map(KernelSpec::gaussian(1.0), Vec::Ones(3)), CapabilityError);
  CHECK_THROWS_AS(feature_map(KernelSpec::polynomial(3), Vec::Ones(1000)), CapacityError);
}

TEST_CASE("explicit-map consistency on 1000 seeded pairs") {
  const std::vector<KernelSpec> families = {KernelSpec::polynomial(2), KernelSpec::logarithmic(),
                                            KernelSpec::linear()};
  for (const KernelSpec& k : families) {
    for (unsigned seed = 0; seed < 1000; ++seed) {
      Vec y = random_vector(3, 1000 + seed) * 0.5;
      Vec z = random_vector(3, 5000 + seed) * 0.5;
      if (k.family == Family::logarithmic) {
        y = y.cwiseAbs();
        z = z.cwiseAbs();
      }
      const double direct = eval(k, y, z);
      const double via_features = feature_map(k, y).dot(feature_map(k, z));
      CHECK(std::abs(direct - via_features) <= 1e-12 * std::max(1.0, std::abs(direct)));
    }
  }
}

TEST_CASE("Cauchy-Schwarz ratio bound with equality only on the diagonal") {
  for (const KernelSpec& k : {KernelSpec::polynomial(2), KernelSpec::gaussian(1.0),
                              KernelSpec::logarithmic(), KernelSpec::linear()}) {
    for (unsigned seed = 0; seed < 50; ++seed) {
      Vec y = random_vector(4, 300 + seed);
      Vec z = random_vector(4, 800 + seed);
      if (k.family == Family::logarithmic) {
        y = y.cwiseAbs();
        z = z.cwiseAbs();
      }
      const double hyz = eval(k, y, z);
      const double hyy = eval(k, y, y);
      const double hzz = eval(k, z, z);
      CHECK(hyz * hyz <= hyy * hzz * (1.0 + 1e-12));
      CHECK(hyz * hyz < hyy * hzz); // distinct random points: strict
      const double diag = eval(k, y, y);
      CHECK(diag * diag == doctest::Approx(hyy * hyy));
    }
  }
}

TEST_CASE("kernel designations parse and print") {
  CHECK(KernelSpec::parse("poly:3").family == Family::polynomial);
  CHECK(KernelSpec::parse("poly:3").gamma == 3);
  CHECK(KernelSpec::parse("gauss:0.25").sigma == doctest::Approx(0.25));
  CHECK(KernelSpec::parse("log").family == Family::logarithmic);
  CHECK(KernelSpec::parse("linear").family == Family::linear);
  CHECK(KernelSpec::parse(KernelSpec::polynomial(5).designation()).gamma == 5);
  CHECK(KernelSpec::parse(KernelSpec::gaussian(100.0).designation()).sigma == doctest::Approx(100.0));
  CHECK_THROWS_AS(KernelSpec::parse("poly:0"), ConfigError);
  CHECK_THROWS_AS(KernelSpec::parse("matern:1"), ConfigError);
  CHECK_THROWS_AS(KernelSpec::parse("gauss:-1"), ConfigError);
}

TEST_CASE("evaluation counters track eval and feature_map calls") {
  reset_counters();
  const Vec y = random_vector(3, 9u);
  eval(KernelSpec::linear(), y, y);
  eval(KernelSpec::gaussian(1.0), y, y);
  CHECK(kernel_eval_count() == 2);
  CHECK(feature_map_count() == 0);
  feature_map(KernelSpec::linear(), y);
  CHECK(feature_map_count() == 1);
  reset_counters();
  CHECK(kernel_eval_count() == 0);
}
