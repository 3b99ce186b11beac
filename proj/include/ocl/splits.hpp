#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ocl/cohort.hpp"

namespace ocl {

/// Cross-validation folds over complete-case subjects. Incomplete subjects
/// never enter a test fold; they are listed as train-only.
struct SplitPlan {
  std::vector<std::vector<std::string>> folds;  // subject ids per fold, sorted
  std::vector<std::string> train_only;          // sorted
  bool stratified = true;

  std::size_t fold_count() const { return folds.size(); }
  /// Indices into cohort.subjects of fold `fold`.
  std::vector<std::size_t> test_indices(const Cohort& cohort, std::size_t fold) const;
  /// Complete-case subjects outside `fold`.
  std::vector<std::size_t> complete_train_indices(const Cohort& cohort, std::size_t fold) const;
  std::vector<std::size_t> train_only_indices(const Cohort& cohort) const;
};

/// Stratified by label when every label present among complete cases has at
/// least k of them; otherwise one global shuffle. Deterministic in (subject
/// set, seed) and independent of subject order. Throws ConfigError for k < 2
/// and CoverageError when there are fewer than k complete cases.
SplitPlan make_splits(const Cohort& cohort, std::size_t k, std::uint64_t seed);

}  // namespace ocl
