#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ocl/classify.hpp"
#include "ocl/embeddings.hpp"
#include "ocl/errors.hpp"
#include "ocl/imputation.hpp"
#include "ocl/splits.hpp"
#include "ocl/stats.hpp"
#include "ocl/synthetic.hpp"
#include "support.hpp"

#include "json.hpp"

using namespace ocl;

namespace {

double t_pdf(double x, double dof) {
  const double log_c = std::lgamma((dof + 1) / 2) - std::lgamma(dof / 2) -
                       0.5 * std::log(dof * std::numbers::pi);
  return std::exp(log_c - (dof + 1) / 2 * std::log1p(x * x / dof));
}

// Two-sided tail by composite Simpson integration of the density on [0, |t|].
double simpson_two_sided(double t, double dof) {
  const int n = 20000;
  const double b = std::abs(t), h = b / n;
  double s = t_pdf(0, dof) + t_pdf(b, dof);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * t_pdf(i * h, dof);
  return 2.0 * (0.5 - s * h / 3.0);
}

struct Moments {
  double mean, var;
};

Moments moments(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= double(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, ss / double(x.size() - 1)};
}

}  // namespace

TEST_CASE("incomplete beta and t tail reference values") {
  CHECK(regularized_incomplete_beta(2, 3, 0.5) == doctest::Approx(0.6875).epsilon(1e-13));
  CHECK(regularized_incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3).epsilon(1e-13));
  CHECK(regularized_incomplete_beta(0.5, 0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(regularized_incomplete_beta(3, 2, 0.0) == 0.0);
  CHECK(regularized_incomplete_beta(3, 2, 1.0) == 1.0);
  // Cauchy: P(|T| > 1) = 1/2 with one degree of freedom.
  CHECK(student_t_two_sided_p(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
  // Two degrees of freedom have a closed form: 1 - |t| / sqrt(2 + t^2).
  for (double t : {0.3, 1.0, 2.5, 7.0}) {
    CHECK(student_t_two_sided_p(t, 2.0) ==
          doctest::Approx(1.0 - t / std::sqrt(2.0 + t * t)).epsilon(1e-12));
  }
  CHECK(student_t_two_sided_p(0.0, 5.0) == 1.0);
  CHECK(student_t_two_sided_p(-2.0, 9.0) == student_t_two_sided_p(2.0, 9.0));
}

TEST_CASE("welch p-values agree with numerical integration") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t na = 3 + rng.below(30), nb = 3 + rng.below(30);
    std::vector<double> a(na), b(nb);
    const double shift = rng.uniform(-1.5, 1.5);
    const double sb = rng.uniform(0.3, 3.0);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = shift + sb * rng.normal();
    TTest r = welch_t_test(a, b);
    Moments ma = moments(a), mb = moments(b);
    const double se2 = ma.var / na + mb.var / nb;
    const double t = (ma.mean - mb.mean) / std::sqrt(se2);
    const double dof = se2 * se2 / (std::pow(ma.var / na, 2) / (na - 1) +
                                     std::pow(mb.var / nb, 2) / (nb - 1));
    CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
    CHECK(r.dof == doctest::Approx(dof).epsilon(1e-12));
    CHECK(std::abs(r.p - simpson_two_sided(t, dof)) < 1e-6);
  }
}

TEST_CASE("welch degenerate inputs") {
  std::vector<double> one{1.0}, two{1.0, 2.0};
  CHECK_THROWS_AS(welch_t_test(one, two), CoverageError);
  std::vector<double> flat_a{2.0, 2.0, 2.0}, flat_b{2.0, 2.0};
  TTest same = welch_t_test(flat_a, flat_b);
  CHECK(same.p == 1.0);
  CHECK(same.t == 0.0);
  std::vector<double> flat_c{3.0, 3.0};
  TTest apart = welch_t_test(flat_a, flat_c);
  CHECK(apart.p == 0.0);
  CHECK(std::isinf(apart.t));
  CHECK(apart.t < 0);
}

TEST_CASE("bonferroni threshold") {
  CHECK(bonferroni_threshold(0.01, 20) == doctest::Approx(0.0005));
  CHECK(bonferroni_threshold(0.05, 1) == 0.05);
  CHECK_THROWS_AS(bonferroni_threshold(0.0, 20), ConfigError);
  CHECK_THROWS_AS(bonferroni_threshold(1.0, 20), ConfigError);
  CHECK_THROWS_AS(bonferroni_threshold(0.01, 0), ConfigError);
}

TEST_CASE("group comparisons find planted differences") {
  Cohort c;
  c.manifest.modalities = {"A", "B"};
  c.manifest.labels = {"x", "y", "z"};
  c.manifest.num_rois = 10;
  Rng rng(2);
  for (std::size_t k = 0; k < 90; ++k) {
    Subject s;
    s.id = "s" + std::to_string(k);
    s.label = k % 3;
    s.features.resize(2);
    std::vector<double> f(10);
    for (std::size_t q = 0; q < 10; ++q) f[q] = rng.normal() + (q < 3 && s.label == 1 ? 3.0 : 0.0);
    s.features[0] = f;
    if (k % 2 == 0) s.features[1] = f;
    c.subjects.push_back(std::move(s));
  }
  StatResult r = group_comparison(c, 0, 0, 1, 0.01);
  CHECK(r.threshold == doctest::Approx(0.001));
  CHECK(r.rois.size() == 10);
  CHECK(r.significant_rois() == std::vector<std::size_t>{0, 1, 2});
  CHECK(r.n_significant() == 3);
  for (const auto& roi : r.rois) CHECK(roi.significant == (roi.p < r.threshold));

  auto all = adjacent_comparisons(c, 0.01);
  REQUIRE(all.size() == 4);
  CHECK(all[0].modality == 0);
  CHECK(all[1].label_a == 1);
  CHECK(all[1].label_b == 2);
  CHECK(all[2].modality == 1);
  CHECK(common_significant(all[0], r) == 3);

  const std::string csv = stat_results_csv(all, c.manifest);
  CHECK(csv.rfind("modality,comparison,roi_index,t,dof,p,significant\n", 0) == 0);
  CHECK(csv.find("\nA,x-y,0,") != std::string::npos);
  CHECK(csv.find("\nB,y-z,9,") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 * 10);

  Cohort sparse = c;
  for (auto& s : sparse.subjects)
    if (s.label == 2) s.features[1].reset();
  sparse.subjects[2].features[1] = std::vector<double>(10, 0.0);
  CHECK_THROWS_AS(group_comparison(sparse, 1, 1, 2, 0.01), CoverageError);
}

TEST_CASE("weighted metrics") {
  std::vector<std::size_t> truth{0, 0, 0, 1, 1, 2};
  std::vector<std::size_t> pred{0, 1, 0, 1, 2, 2};
  Metrics m = classification_metrics(truth, pred, 3);
  CHECK(m.accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(m.recall == doctest::Approx(m.accuracy));
  // precision per class: 2/2, 1/2, 1/2 weighted by support 3, 2, 1
  CHECK(m.precision == doctest::Approx((3 * 1.0 + 2 * 0.5 + 1 * 0.5) / 6.0));
  CHECK(m.confusion[0] == std::vector<std::size_t>{2, 1, 0});

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(50), classes = 2 + rng.below(4);
    auto t = test::random_ids(rng, n, classes);
    auto p = test::random_ids(rng, n, classes);
    Metrics r = classification_metrics(t, p, classes);
    CHECK(r.recall == doctest::Approx(r.accuracy).epsilon(1e-12));
    CHECK(r.precision >= 0.0);
    CHECK(r.precision <= 1.0 + 1e-12);
  }
  CHECK_THROWS_AS(classification_metrics(truth, std::vector<std::size_t>{0}, 3), DimensionError);
  CHECK_THROWS_AS(classification_metrics(truth, pred, 2), LabelError);
}

TEST_CASE("fold summaries") {
  std::vector<double> v{0.5, 0.7, 0.9};
  Summary s = summarize(v);
  CHECK(s.mean == doctest::Approx(0.7));
  CHECK(s.stddev == doctest::Approx(std::sqrt(0.08 / 3.0)));
  CHECK(summarize(std::vector<double>{}).mean == 0.0);
}

TEST_CASE("mlp classifier learns a separable problem") {
  Rng rng(4);
  Matrix x(300, 4);
  std::vector<std::size_t> y(300);
  for (std::size_t i = 0; i < 300; ++i) {
    y[i] = i % 3;
    for (std::size_t c = 0; c < 4; ++c) x(i, c) = 100.0 + 10.0 * rng.normal();
    x(i, y[i]) += 80.0;
  }
  ClassifierConfig config;
  config.epochs = 30;
  MlpClassifier clf;
  clf.fit(x, y, 3, config);
  Metrics m = classification_metrics(y, clf.predict(x), 3);
  CHECK(m.accuracy > 0.95);

  ClassifierConfig bad = config;
  bad.depth = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("downstream classification guards against leakage") {
  SyntheticSpec spec;
  spec.subjects = 150;
  spec.rois = 5;
  spec.seed = 5;
  auto data = generate_synthetic(spec);
  const Cohort& c = data.observed;
  SplitPlan plan = make_splits(c, 3, 1);
  ClassifierConfig config;
  config.epochs = 5;
  ImputedCohort filled = impute_class_mean(c);
  ClassifierReport with = downstream_classify(c, plan, &filled, config);
  ClassifierReport without = downstream_classify(c, plan, nullptr, config);
  REQUIRE(with.folds.size() == 3);
  for (std::size_t f = 0; f < 3; ++f) {
    CHECK(with.folds[f].test_size == without.folds[f].test_size);
    CHECK(with.folds[f].train_size == without.folds[f].train_size + plan.train_only.size());
  }
  CHECK(with.imputation);
  CHECK_FALSE(without.imputation);

  auto j = nlohmann::json::parse(with.to_json(c.manifest));
  CHECK(j["depth"] == 2);
  CHECK(j["folds"].size() == 3);
  CHECK(j["accuracy"]["mean"].get<double>() == doctest::Approx(with.accuracy.mean));
  CHECK(j["labels"][3] == "AD");

  // A fold member that is not a complete case.
  SplitPlan leaky = plan;
  leaky.folds[0].push_back(plan.train_only.front());
  CHECK_THROWS_AS(downstream_classify(c, leaky, nullptr, config), LeakageError);

  // A complete case whose imputed copy claims an imputed cell.
  ImputedCohort tampered = filled;
  const auto k = *tampered.cohort.find(plan.folds[1].front());
  tampered.provenance[k][2].status = CellStatus::kImputed;
  CHECK_THROWS_AS(downstream_classify(c, plan, &tampered, config), LeakageError);

  ClassifierConfig deep = config;
  deep.depth = 3;
  CHECK_THROWS_AS(downstream_classify(c, plan, nullptr, deep), ConfigError);
  deep.depth = 4;
  CHECK(downstream_classify(c, plan, nullptr, deep).depth == 4);
}

TEST_CASE("modality probe") {
  Rng rng(6);
  const std::size_t n = 800;
  Matrix same(n, 4), apart(n, 4);
  std::vector<std::size_t> mods(n);
  for (std::size_t i = 0; i < n; ++i) {
    mods[i] = i % 4;
    for (std::size_t c = 0; c < 4; ++c) {
      same(i, c) = rng.normal();
      apart(i, c) = rng.normal() + (c == mods[i] ? 4.0 : 0.0);
    }
  }
  ClassifierConfig config;
  config.epochs = 20;
  config.standardize = false;
  CHECK(modality_probe_accuracy(same, mods, 4, config) < 0.35);
  CHECK(modality_probe_accuracy(apart, mods, 4, config) > 0.9);
  CHECK_THROWS_AS(modality_probe_accuracy(same, mods, 4, config, 1.0), ConfigError);
}

TEST_CASE("embedding export") {
  Cohort c = test::tiny_cohort(10, 7);
  Rng rng(8);
  Encoder e(2, 5, 3, rng);
  std::vector<std::size_t> all(10);
  for (std::size_t k = 0; k < 10; ++k) all[k] = k;
  e.stats = standardization_stats(c, all);
  EmbeddedRecords r = embed_cohort(c, e);
  std::size_t observed = 0;
  for (const auto& s : c.subjects) observed += s.observed_count();
  CHECK(r.embeddings.rows() == observed);
  CHECK(r.embeddings.cols() == 3);
  const std::string csv = embeddings_csv(c, e);
  CHECK(csv.rfind("subject_id,modality,label,z_0,z_1,z_2\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + observed);
}
