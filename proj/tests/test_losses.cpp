#include <cmath>
#include <limits>

#include "doctest.h"
#include "ocl/errors.hpp"
#include "ocl/losses.hpp"
#include "ocl/model.hpp"
#include "support.hpp"

using namespace ocl;
using namespace ocl::losses;

namespace {

double dot_rows(const Matrix& z, std::size_t i, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < z.cols(); ++k) s += z(i, k) * z(j, k);
  return s;
}

// Direct transcription of the contrastive objectives, averaged over anchors
// that have a positive. Nothing is shifted or cached.
double oracle_contrastive(const Matrix& z, const std::vector<std::size_t>& y, double tau,
                          bool ordinal) {
  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t j = 0; j < z.rows(); ++j) {
      if (j == i) continue;
      (y[j] == y[i] ? pos : neg).push_back(j);
    }
    if (pos.empty()) continue;
    auto tau_n = [&](std::size_t n) {
      return ordinal ? tau / std::abs(double(y[i]) - double(y[n])) : tau;
    };
    double tau_p = tau;
    if (ordinal && !neg.empty()) {
      double num = 0.0, den = 0.0;
      for (auto n : neg) {
        num += std::exp(dot_rows(z, i, n) / tau_n(n));
        den += std::exp(dot_rows(z, i, n) / tau_n(n)) / tau_n(n);
      }
      tau_p = num / den;
    }
    double denom = 0.0;
    for (auto q : pos) denom += std::exp(dot_rows(z, i, q) / tau_p);
    for (auto n : neg) denom += std::exp(dot_rows(z, i, n) / tau_n(n));
    double a = 0.0;
    for (auto p : pos) a += std::log(std::exp(dot_rows(z, i, p) / tau_p) / denom);
    total += -a / double(pos.size());
    ++anchors;
  }
  return total / double(anchors);
}

double oracle_coherence(const Matrix& z, const std::vector<std::size_t>& subj,
                        const std::vector<std::size_t>& mod) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.rows(); ++j) {
      if (i == j || subj[i] != subj[j] || mod[i] == mod[j]) continue;
      total -= dot_rows(z, i, j) / std::sqrt(dot_rows(z, i, i) * dot_rows(z, j, j));
      ++pairs;
    }
  return pairs ? total / double(pairs) : 0.0;
}

std::vector<std::size_t> labels_with_two_values(Rng& rng, std::size_t n, std::size_t v) {
  std::vector<std::size_t> y;
  do {
    y = test::random_ids(rng, n, v);
  } while (std::all_of(y.begin(), y.end(), [&](auto l) { return l == y[0]; }));
  return y;
}

}  // namespace

TEST_CASE("contrastive losses match the direct formula") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = 2 + rng.below(14);
    Matrix z = test::random_unit_rows(rng, b, 5);
    auto y = labels_with_two_values(rng, b, 4);
    const double tau = 0.05 + 0.5 * rng.uniform();
    if (std::none_of(y.begin(), y.end(), [&](auto l) {
          return std::count(y.begin(), y.end(), l) > 1;
        })) {
      continue;
    }
    CHECK(supervised_contrastive_loss(z, y, tau).loss ==
          doctest::Approx(oracle_contrastive(z, y, tau, false)).epsilon(1e-12));
    CHECK(ordinal_contrastive_loss(z, y, tau).loss ==
          doctest::Approx(oracle_contrastive(z, y, tau, true)).epsilon(1e-12));
  }
}

TEST_CASE("contrastive gradients match finite differences") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix z = test::random_unit_rows(rng, 8, 4);
    auto y = labels_with_two_values(rng, 8, 4);
    for (auto mode : {ContrastiveMode::kSupervised, ContrastiveMode::kOrdinal}) {
      ContrastiveResult r = contrastive_loss(z, y, {0.1, mode, std::nullopt});
      if (!r.defined()) continue;
      ContrastiveOptions frozen{0.1, mode, r.positive_tau};
      for (double& t : *frozen.frozen_positive_tau)
        if (std::isnan(t)) t = 0.1;
      Matrix numeric = test::central_difference(
          [&](const Matrix& x) { return contrastive_loss(x, y, frozen).loss; }, z);
      CHECK(test::relative_error(r.gradient, numeric) < 1e-6);
    }
  }
}

TEST_CASE("ordinal loss reduces to the supervised loss for two adjacent labels") {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 2 + rng.below(20);
    Matrix z = test::random_unit_rows(rng, b, 6);
    const std::size_t low = rng.below(3);
    std::vector<std::size_t> y(b);
    for (auto& l : y) l = low + rng.below(2);
    y[0] = low;
    y[1] = low + 1;
    auto oc = ordinal_contrastive_loss(z, y, 0.1);
    auto sc = supervised_contrastive_loss(z, y, 0.1);
    CHECK(oc.anchors_used == sc.anchors_used);
    CHECK(std::abs(oc.loss - sc.loss) <= 1e-9);
  }
}

TEST_CASE("adaptive positive temperature") {
  Rng rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(10);
    std::vector<NegativeTerm> terms(n);
    double lo = 1e9, hi = 0.0;
    for (auto& t : terms) {
      t.similarity = rng.uniform(-1, 1);
      t.tau = 0.1 / double(1 + rng.below(3));
      lo = std::min(lo, t.tau);
      hi = std::max(hi, t.tau);
    }
    const double tp = adaptive_positive_temperature(terms, 0.1);
    CHECK(tp >= lo * (1 - 1e-12));
    CHECK(tp <= hi * (1 + 1e-12));
    double lhs = 0.0, rhs = 0.0;
    for (const auto& t : terms) {
      lhs += std::exp(t.similarity / t.tau) / t.tau;
      rhs += std::exp(t.similarity / t.tau);
    }
    CHECK(lhs == doctest::Approx(rhs / tp).epsilon(1e-12));
  }
  CHECK(adaptive_positive_temperature(std::span<const NegativeTerm>{}, 0.3) == 0.3);

  // All negatives at one distance give exactly that temperature.
  std::vector<NegativeTerm> same{{0.3, 0.05}, {-0.2, 0.05}};
  CHECK(adaptive_positive_temperature(same, 0.1) == doctest::Approx(0.05));

  std::vector<double> anchor{1.0, 0.0}, other{0.5, 0.5};
  std::vector<NegativeSample> samples{{other, 0.1}};
  CHECK(adaptive_positive_temperature(anchor, samples, 0.2) == doctest::Approx(0.1));
  std::vector<double> wrong{1.0};
  std::vector<NegativeSample> bad{{wrong, 0.1}};
  CHECK_THROWS_AS(adaptive_positive_temperature(anchor, bad, 0.2), DimensionError);
}

TEST_CASE("contrastive edge cases") {
  Rng rng(15);
  Matrix z = test::random_unit_rows(rng, 4, 3);
  std::vector<std::size_t> same{1, 1, 1, 1};
  auto r = ordinal_contrastive_loss(z, same, 0.1);
  CHECK_FALSE(r.defined());
  CHECK(r.gradient == Matrix(4, 3));

  // Anchor 3 has no positive and is skipped.
  std::vector<std::size_t> y{0, 0, 2, 3};
  auto s = ordinal_contrastive_loss(z, y, 0.1);
  CHECK(s.anchors_used == 2);
  CHECK(std::isnan(s.positive_tau[3]));
  CHECK(s.anchors_fallback == 0);

  CHECK_THROWS_AS(ordinal_contrastive_loss(Matrix(1, 3, 1.0), std::vector<std::size_t>{0}, 0.1),
                  InsufficientBatchError);
  CHECK_THROWS_AS(ordinal_contrastive_loss(z, std::vector<std::size_t>{0, 1}, 0.1), DimensionError);
  CHECK_THROWS_AS(ordinal_contrastive_loss(z, y, 0.0), ConfigError);
  CHECK(label_distance(1, 3) == 2);
  CHECK(label_distance(3, 1) == 2);
}

TEST_CASE("modality coherence matches the pairwise formula") {
  Rng rng(16);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t b = 2 + rng.below(12);
    Matrix z = test::random_matrix(rng, b, 4);
    auto subj = test::random_ids(rng, b, 4);
    auto mod = test::random_ids(rng, b, 3);
    auto r = modality_coherence_loss(z, subj, mod);
    CHECK(r.loss == doctest::Approx(oracle_coherence(z, subj, mod)).epsilon(1e-12));
    Matrix numeric = test::central_difference(
        [&](const Matrix& x) { return modality_coherence_loss(x, subj, mod).loss; }, z);
    CHECK(test::relative_error(r.gradient, numeric) < 1e-6);
  }
  Matrix z = Matrix::from_rows({{1, 0}, {0, 1}, {1, 0}});
  std::vector<std::size_t> subj{0, 0, 1}, mod{0, 1, 0};
  auto r = modality_coherence_loss(z, subj, mod);
  CHECK(r.pairs == 2);
  CHECK(r.loss == 0.0);
  std::vector<std::size_t> alone{0, 1, 2};
  auto none = modality_coherence_loss(z, alone, mod);
  CHECK(none.pairs == 0);
  CHECK(none.loss == 0.0);
}

TEST_CASE("domain adversarial loss reverses the gradient into the embeddings") {
  Rng init(17);
  DomainClassifier classifier(4, 8, 3, init);
  Rng rng(18);
  const Matrix z = test::random_unit_rows(rng, 6, 4);
  const std::vector<std::size_t> mods{0, 1, 2, 0, 1, 2};
  Parameter zp{"z", z, false};

  Tape tape;
  Var loss = domain_adversarial_loss(tape, tape.parameter(zp), mods, classifier, 0.5);
  auto grads = tape.backward(loss);
  Matrix numeric = test::central_difference(
      [&](const Matrix& x) {
        Tape t;
        return scalar(t, softmax_cross_entropy(t, classifier.forward(t, t.constant(x)), mods));
      },
      z);
  numeric *= -0.5;
  CHECK(test::relative_error(grads.at("z"), numeric) < 1e-6);

  // The classifier itself still descends the plain cross-entropy.
  auto params = classifier.parameters();
  const std::string w = params[0]->name;
  Matrix fd_w = test::central_difference(
      [&](const Matrix& x) {
        DomainClassifier copy = classifier;
        copy.parameters()[0]->value = x;
        Tape t;
        return scalar(t, softmax_cross_entropy(t, copy.forward(t, t.constant(z)), mods));
      },
      params[0]->value);
  CHECK(test::relative_error(grads.at(w), fd_w) < 1e-6);

  Tape t2;
  CHECK_THROWS_AS(domain_adversarial_loss(t2, t2.constant(z), mods, classifier, -1.0), ConfigError);
  std::vector<std::size_t> bad{0, 1, 2, 3, 0, 0};
  CHECK_THROWS_AS(domain_adversarial_loss(t2, t2.constant(z), bad, classifier, 1.0), LabelError);
}

TEST_CASE("decoder loss is the mean squared error of the conditioned reconstruction") {
  Rng init(19);
  Decoder decoder(4, 3, 8, 5, init);
  Rng rng(20);
  const Matrix z = test::random_unit_rows(rng, 5, 4);
  const Matrix target = test::random_matrix(rng, 5, 5);
  const std::vector<std::size_t> mods{2, 0, 1, 1, 0};
  Tape tape;
  Var l = decoder_loss(tape, target, tape.constant(z), mods, decoder);
  Matrix recon = decoder.decode(z, mods);
  double mse = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double d = recon.values()[i] - target.values()[i];
    mse += d * d;
  }
  CHECK(scalar(tape, l) == doctest::Approx(mse / 25.0).epsilon(1e-13));
}

TEST_CASE("encoder loss sums its terms") {
  Rng init(21);
  DomainClassifier classifier(4, 8, 3, init);
  Rng rng(22);
  LabeledBatch batch;
  batch.embeddings = test::random_unit_rows(rng, 8, 4);
  batch.labels = {0, 1, 2, 3, 0, 1, 2, 3};
  batch.modality_ids = {0, 1, 2, 0, 1, 2, 0, 1};
  batch.subject_ids = {0, 0, 1, 1, 2, 2, 3, 3};
  batch.validate(4, 3);

  EncoderLossOptions options;
  Tape tape;
  auto out = encoder_loss(tape, tape.constant(batch.embeddings), batch, classifier, options);
  const auto& r = out.report;
  CHECK(r.l_e == doctest::Approx(r.l_da + r.l_contrastive + r.l_mc).epsilon(1e-14));
  CHECK(r.l_contrastive ==
        doctest::Approx(oracle_contrastive(batch.embeddings, batch.labels, 0.1, true)));
  CHECK(r.l_mc ==
        doctest::Approx(oracle_coherence(batch.embeddings, batch.subject_ids, batch.modality_ids)));
  CHECK(r.n_mc_pairs == 8);

  options.use_mc = false;
  Tape t2;
  auto no_mc = encoder_loss(t2, t2.constant(batch.embeddings), batch, classifier, options);
  CHECK(no_mc.report.l_mc == 0.0);
  CHECK(no_mc.report.l_e == doctest::Approx(r.l_da + r.l_contrastive));

  LabeledBatch single = batch;
  single.labels.assign(8, 2);
  Tape t3;
  auto skipped = encoder_loss(t3, t3.constant(single.embeddings), single, classifier, options);
  CHECK(skipped.report.contrastive_skipped);
  CHECK(skipped.report.l_e == doctest::Approx(skipped.report.l_da));
}

TEST_CASE("batch validation") {
  LabeledBatch batch;
  batch.embeddings = Matrix::from_rows({{1, 0}, {0, 1}});
  batch.labels = {0, 1};
  batch.modality_ids = {0, 1};
  batch.subject_ids = {0, 0};
  CHECK_NOTHROW(batch.validate(2, 2));
  CHECK_THROWS_AS(batch.validate(1, 2), LabelError);
  CHECK_THROWS_AS(batch.validate(2, 1), LabelError);
  batch.subject_ids = {0};
  CHECK_THROWS_AS(batch.validate(2, 2), DimensionError);
  batch.subject_ids = {0, 0};
  batch.embeddings(0, 0) = 2.0;
  CHECK_THROWS_AS(batch.validate(2, 2), DegenerateEmbeddingError);
}
