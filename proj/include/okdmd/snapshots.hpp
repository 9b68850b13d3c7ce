// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "okdmd/types.hpp"

namespace okdmd::core {

/// Paired snapshot matrices. Column i of Y is the one-step successor of
/// column i of X. When built from N trajectories of length T, column
/// (T-1)*(i-1)+j of X holds x_j of trajectory i and the same column of Y
/// holds x_{j+1}, so m = N*(T-1).
struct SnapshotSet {
  Mat X; // p x m predecessors
  Mat Y; // p x m successors
  int N = 0; // trajectory count, 0 when unknown
  int T = 0; // trajectory length, 0 when unknown

  Index ambient_dim() const { return X.rows(); }
  Index pair_count() const { return X.cols(); }
  void validate() const;
};

using MetaMap = std::map<std::string, std::string>;

/// Key=value metadata files ("gen.meta", "model.meta").
void save_meta(const std::filesystem::path& file, const MetaMap& meta);
MetaMap load_meta(const std::filesystem::path& file);

} // namespace okdmd::core
