// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>

#include <Eigen/Dense>

namespace okdmd {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Complex = std::complex<double>;
using Index = Eigen::Index;

} // namespace okdmd
