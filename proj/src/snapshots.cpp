// SPDX-License-Identifier: Apache-2.0
#include "okdmd/snapshots.hpp"

#include <fstream>

#include "okdmd/errors.hpp"

namespace okdmd::core {

void SnapshotSet::validate() const {
  if (X.rows() != Y.rows() || X.cols() != Y.cols()) {
    throw InvalidInputError("SnapshotSet: X and Y shapes differ");
  }
  if (X.rows() < 1 || X.cols() < 1) {
    throw InvalidInputError("SnapshotSet: empty snapshot matrices");
  }
  if (!X.allFinite() || !Y.allFinite()) {
    throw InvalidInputError("SnapshotSet: non-finite entries");
  }
  if (N > 0 && T > 1 && static_cast<Index>(N) * (T - 1) != X.cols()) {
    throw InvalidInputError("SnapshotSet: pair count does not match N*(T-1)");
  }
}

void save_meta(const std::filesystem::path& file, const MetaMap& meta) {
  std::ofstream os(file);
  if (!os) throw InvalidInputError("cannot open for writing: " + file.string());
  for (const auto& [key, value] : meta) {
    os << key << '=' << value << '\n';
  }
}

MetaMap load_meta(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw InvalidInputError("cannot open: " + file.string());
  MetaMap meta;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInputError(file.string() + ": malformed meta line '" + line + "'");
    }
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

} // namespace okdmd::core
