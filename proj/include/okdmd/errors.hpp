// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace okdmd {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or out-of-contract input (non-finite entries, shape mismatch,
/// asymmetric Gram, zero denominator, ...).
class InvalidInputError : public Error {
public:
  using Error::Error;
};

/// Input outside a kernel's domain of definition.
class KernelDomainError : public Error {
public:
  using Error::Error;
};

/// Requested operation is not defined for this kernel family.
class CapabilityError : public Error {
public:
  using Error::Error;
};

/// Operation refused because it would exceed a size cap.
class CapacityError : public Error {
public:
  using Error::Error;
};

/// An iterative numerical procedure failed (no convergence, spectra that
/// cannot be paired, ...).
class NumericalFailure : public Error {
public:
  using Error::Error;
};

/// An eigen-pair whose normalization product is numerically zero.
class DegenerateEigenpairError : public Error {
public:
  using Error::Error;
};

/// |lambda|^(t-1) would overflow for the requested horizon.
class HorizonOverflowError : public Error {
public:
  using Error::Error;
};

/// Pre-image coefficients on which a closed form is undefined (e.g. the
/// Gaussian normalizer sum_i g_i is numerically zero).
class DegenerateCoefficientsError : public Error {
public:
  using Error::Error;
};

/// Dataset generation could not meet its postconditions.
class GenerationError : public Error {
public:
  using Error::Error;
};

/// Bad experiment / CLI configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace okdmd
