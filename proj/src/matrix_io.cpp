// SPDX-License-Identifier: Apache-2.0
#include "okdmd/matrix_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "okdmd/errors.hpp"

namespace okdmd::linalg {

namespace {

void append_double(std::string& out, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void append_complex(std::string& out, Complex v) {
  append_double(out, v.real());
  if (!std::signbit(v.imag())) out += '+';
  append_double(out, v.imag());
  out += 'i';
}

// Accepts "a", "a+bi" and "a-bi"; exponents inside either part are fine.
// from_chars rejects a leading '+', so signs are consumed explicitly.
Complex parse_entry(const std::string& tok, const std::string& origin) {
  const char* end = tok.data() + tok.size();
  const auto parse_signed = [&](const char* at, double& value) -> const char* {
    double sign = 1.0;
    if (at < end && (*at == '+' || *at == '-')) {
      if (*at == '-') sign = -1.0;
      ++at;
    }
    auto [p, ec] = std::from_chars(at, end, value);
    if (ec != std::errc{}) return nullptr;
    value *= sign;
    return p;
  };
  double re = 0.0;
  const char* p = parse_signed(tok.data(), re);
  if (p == nullptr) {
    throw InvalidInputError(origin + ": cannot parse matrix entry '" + tok + "'");
  }
  if (p == end) return Complex(re, 0.0);
  double im = 0.0;
  const char* q = parse_signed(p, im);
  if (q == nullptr || q + 1 != end || *q != 'i') {
    throw InvalidInputError(origin + ": cannot parse matrix entry '" + tok + "'");
  }
  return Complex(re, im);
}

template <typename Scalar>
void write_impl(std::ostream& os, const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& m) {
  std::string line;
  line.reserve(static_cast<std::size_t>(m.cols()) * 28);
  os << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) line += ' ';
      if constexpr (std::is_same_v<Scalar, double>) {
        append_double(line, m(i, j));
      } else {
        append_complex(line, m(i, j));
      }
    }
    line += '\n';
    os << line;
  }
}

} // namespace

void write_matrix(std::ostream& os, const Mat& m) { write_impl(os, m); }
void write_matrix(std::ostream& os, const CMat& m) { write_impl(os, m); }

void save_matrix(const std::filesystem::path& file, const Mat& m) {
  std::ofstream os(file);
  if (!os) throw InvalidInputError("cannot open for writing: " + file.string());
  write_matrix(os, m);
  if (!os) throw InvalidInputError("write failed: " + file.string());
}

void save_matrix(const std::filesystem::path& file, const CMat& m) {
  std::ofstream os(file);
  if (!os) throw InvalidInputError("cannot open for writing: " + file.string());
  write_matrix(os, m);
  if (!os) throw InvalidInputError("write failed: " + file.string());
}

CMat parse_matrix(std::istream& is, const std::string& origin) {
  Index rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows < 1 || cols < 1) {
    throw InvalidInputError(origin + ": bad matrix header");
  }
  CMat m(rows, cols);
  std::string tok;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (!(is >> tok)) {
        throw InvalidInputError(origin + ": truncated matrix body");
      }
      m(i, j) = parse_entry(tok, origin);
    }
  }
  return m;
}

CMat load_matrix(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw InvalidInputError("cannot open: " + file.string());
  return parse_matrix(is, file.string());
}

Mat load_real_matrix(const std::filesystem::path& file) {
  CMat c = load_matrix(file);
  if ((c.imag().array() != 0.0).any()) {
    throw InvalidInputError(file.string() + ": expected a real matrix");
  }
  return c.real();
}

} // namespace okdmd::linalg
