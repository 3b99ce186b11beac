#include "ocl/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "ocl/errors.hpp"

namespace ocl {

namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // sample (n - 1)
  double n = 0.0;
};

Moments moments(std::span<const double> xs) {
  Moments m;
  m.n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= m.n;
  for (double x : xs) m.variance += (x - m.mean) * (x - m.mean);
  m.variance /= m.n - 1.0;
  return m;
}

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEpsilon = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEpsilon) return h;
  }
  throw NumericError(fmt::format("incomplete beta did not converge (a={}, b={}, x={})", a, b, x));
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw NumericError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw NumericError("incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw NumericError("t distribution needs positive degrees of freedom");
  if (std::isnan(t)) throw NumericError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  const double p = regularized_incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
  return std::clamp(p, 0.0, 1.0);
}

TTest welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw CoverageError(fmt::format("t-test needs at least two values per group (got {} and {})",
                                    a.size(), b.size()));
  }
  const Moments ma = moments(a);
  const Moments mb = moments(b);
  const double va = ma.variance / ma.n;
  const double vb = mb.variance / mb.n;
  const double se2 = va + vb;
  TTest out;
  if (se2 == 0.0) {
    out.dof = ma.n + mb.n - 2.0;
    if (ma.mean == mb.mean) {
      out.t = 0.0;
      out.p = 1.0;
    } else {
      out.t = ma.mean > mb.mean ? std::numeric_limits<double>::infinity()
                                : -std::numeric_limits<double>::infinity();
      out.p = 0.0;
    }
    return out;
  }
  out.t = (ma.mean - mb.mean) / std::sqrt(se2);
  out.dof = se2 * se2 / (va * va / (ma.n - 1.0) + vb * vb / (mb.n - 1.0));
  out.p = student_t_two_sided_p(out.t, out.dof);
  return out;
}

double bonferroni_threshold(double alpha, std::size_t tests) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (tests == 0) throw ConfigError("Bonferroni correction needs at least one test");
  return alpha / static_cast<double>(tests);
}

std::size_t StatResult::n_significant() const {
  return static_cast<std::size_t>(
      std::count_if(rois.begin(), rois.end(), [](const RoiTest& r) { return r.significant; }));
}

std::vector<std::size_t> StatResult::significant_rois() const {
  std::vector<std::size_t> out;
  for (std::size_t q = 0; q < rois.size(); ++q) {
    if (rois[q].significant) out.push_back(q);
  }
  return out;
}

StatResult group_comparison(const Cohort& cohort, std::size_t modality, std::size_t label_a,
                            std::size_t label_b, double alpha) {
  const Manifest& m = cohort.manifest;
  if (modality >= m.num_modalities()) throw LabelError("modality index out of range");
  if (label_a >= m.num_labels() || label_b >= m.num_labels()) {
    throw LabelError("label index out of range");
  }
  const std::size_t q_count = m.num_rois;

  // Column-major copies: group[q] holds ROI q across subjects.
  std::vector<std::vector<double>> group_a(q_count);
  std::vector<std::vector<double>> group_b(q_count);
  for (const auto& s : cohort.subjects) {
    if (!s.features[modality]) continue;
    auto* target = s.label == label_a ? &group_a : s.label == label_b ? &group_b : nullptr;
    if (target == nullptr) continue;
    for (std::size_t q = 0; q < q_count; ++q) (*target)[q].push_back((*s.features[modality])[q]);
  }
  if (group_a[0].size() < 2 || group_b[0].size() < 2) {
    throw CoverageError(fmt::format("{}: groups {} ({}) and {} ({}) need at least two subjects each",
                                    m.modalities[modality], m.labels[label_a], group_a[0].size(),
                                    m.labels[label_b], group_b[0].size()));
  }

  StatResult out;
  out.modality = modality;
  out.label_a = label_a;
  out.label_b = label_b;
  out.alpha = alpha;
  out.threshold = bonferroni_threshold(alpha, q_count);
  out.rois.resize(q_count);
  for (std::size_t q = 0; q < q_count; ++q) {
    const TTest t = welch_t_test(group_a[q], group_b[q]);
    out.rois[q] = RoiTest{t.t, t.dof, t.p, t.p < out.threshold};
  }
  return out;
}

std::vector<StatResult> adjacent_comparisons(const Cohort& cohort, double alpha) {
  std::vector<StatResult> out;
  for (std::size_t t = 0; t < cohort.manifest.num_modalities(); ++t) {
    for (std::size_t v = 0; v + 1 < cohort.manifest.num_labels(); ++v) {
      out.push_back(group_comparison(cohort, t, v, v + 1, alpha));
    }
  }
  return out;
}

std::size_t common_significant(const StatResult& a, const StatResult& b) {
  if (a.rois.size() != b.rois.size()) throw DimensionError("results cover different ROI counts");
  std::size_t n = 0;
  for (std::size_t q = 0; q < a.rois.size(); ++q) {
    if (a.rois[q].significant && b.rois[q].significant) ++n;
  }
  return n;
}

std::string stat_results_csv(std::span<const StatResult> results, const Manifest& manifest) {
  std::string out = "modality,comparison,roi_index,t,dof,p,significant\n";
  for (const auto& r : results) {
    const std::string comparison =
        fmt::format("{}-{}", manifest.labels.at(r.label_a), manifest.labels.at(r.label_b));
    for (std::size_t q = 0; q < r.rois.size(); ++q) {
      const auto& roi = r.rois[q];
      out += fmt::format("{},{},{},{},{},{},{}\n", manifest.modalities.at(r.modality), comparison,
                         q, format_number(roi.t), format_number(roi.dof), format_number(roi.p),
                         roi.significant ? 1 : 0);
    }
  }
  return out;
}

}  // namespace ocl
