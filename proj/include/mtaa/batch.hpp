#pragma once

#include "mtaa/common.hpp"

#include <string>
#include <vector>

namespace mtaa {

/// A preprocessed mini-batch: one feature row per sample plus one target
/// matrix (batch x levels) per task.
struct SampleBatch {
  Mat features;              // batch x feature_dim, values in [0, 1]
  std::vector<Mat> targets;  // one per task, each batch x kNumLevels

  int size() const { return static_cast<int>(features.rows()); }
  int num_tasks() const { return static_cast<int>(targets.size()); }

  /// Checks the invariants: feature range, target shapes, target rows are
  /// valid distributions. Throws InvalidInput.
  void validate() const;
};

}  // namespace mtaa
