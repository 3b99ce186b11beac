#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ocl/cohort.hpp"

namespace ocl {

struct TTest {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;  // two-sided
};

/// Unequal-variance two-sample t-test. Each sample needs at least two values
/// (CoverageError otherwise). When both variances are zero the result is
/// p = 1 for equal means and p = 0 (t = +-inf) otherwise.
TTest welch_t_test(std::span<const double> a, std::span<const double> b);

/// I_x(a, b) via its continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
/// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

/// alpha / tests; throws ConfigError unless alpha in (0, 1) and tests >= 1.
double bonferroni_threshold(double alpha, std::size_t tests);

struct RoiTest {
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
  bool significant = false;
};

struct StatResult {
  std::size_t modality = 0;
  std::size_t label_a = 0;
  std::size_t label_b = 0;
  double alpha = 0.01;
  double threshold = 0.0;  // alpha / Q
  std::vector<RoiTest> rois;

  std::size_t n_significant() const;
  std::vector<std::size_t> significant_rois() const;
};

/// Per-ROI Welch tests of `modality` between subjects labelled label_a and
/// label_b, using whichever feature vectors are present in `cohort`. Throws
/// CoverageError when either group has fewer than two vectors.
StatResult group_comparison(const Cohort& cohort, std::size_t modality, std::size_t label_a,
                            std::size_t label_b, double alpha);

/// Every modality against every pair of consecutive labels, modality-major.
std::vector<StatResult> adjacent_comparisons(const Cohort& cohort, double alpha);

/// Number of ROIs significant in both results.
std::size_t common_significant(const StatResult& a, const StatResult& b);

/// Columns: modality,comparison,roi_index,t,dof,p,significant.
std::string stat_results_csv(std::span<const StatResult> results, const Manifest& manifest);

}  // namespace ocl
