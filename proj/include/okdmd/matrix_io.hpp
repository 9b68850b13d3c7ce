// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "okdmd/types.hpp"

namespace okdmd::linalg {

// Matrix text format used repo-wide: first line "rows cols", then one row per
// line, whitespace-separated decimal values. Complex entries are written as
// "a+bi". Values are printed with 17 significant digits so that doubles
// round-trip exactly.

void write_matrix(std::ostream& os, const Mat& m);
void write_matrix(std::ostream& os, const CMat& m);
void save_matrix(const std::filesystem::path& file, const Mat& m);
void save_matrix(const std::filesystem::path& file, const CMat& m);

/// Reads a matrix in the text format; real files come back with zero
/// imaginary parts.
CMat load_matrix(const std::filesystem::path& file);

/// Same as load_matrix but requires every imaginary part to be exactly zero.
Mat load_real_matrix(const std::filesystem::path& file);

CMat parse_matrix(std::istream& is, const std::string& origin = "<stream>");

} // namespace okdmd::linalg
