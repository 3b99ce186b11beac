#include <cmath>
#include <cstring>
#include <sstream>

#include "doctest.h"
#include "ocl/checkpoint.hpp"
#include "ocl/errors.hpp"
#include "ocl/kernels.hpp"
#include "ocl/run_config.hpp"
#include "ocl/synthetic.hpp"
#include "ocl/training.hpp"
#include "support.hpp"

using namespace ocl;

namespace {

SyntheticCohort small_synthetic(std::uint64_t seed, std::size_t subjects = 60) {
  SyntheticSpec spec;
  spec.subjects = subjects;
  spec.rois = 6;
  spec.seed = seed;
  return generate_synthetic(spec);
}

TrainConfig quick_config(std::size_t epochs = 20) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 32;
  c.hidden_width = 16;
  c.embedding_dim = 8;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("train config validation") {
  CHECK_NOTHROW(TrainConfig{}.validate());
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad([](TrainConfig& c) { c.epochs = 0; });
  bad([](TrainConfig& c) { c.batch_size = 0; });
  bad([](TrainConfig& c) { c.lr = 0.0; });
  bad([](TrainConfig& c) { c.weight_decay = -1.0; });
  bad([](TrainConfig& c) { c.tau = 0.0; });
  bad([](TrainConfig& c) { c.lambda_rev = -0.5; });
  bad([](TrainConfig& c) { c.log_every = 0; });
  bad([](TrainConfig& c) { c.embedding_dim = 0; });
  CHECK(loss_mode_from_string("scl") == LossMode::kScl);
  CHECK(to_string(LossMode::kOcl) == "ocl");
  CHECK_THROWS_AS(loss_mode_from_string("OCL"), ConfigError);
}

TEST_CASE("records and subject selection") {
  Cohort c = test::tiny_cohort(12, 4);
  auto all = training_subjects(c, false);
  auto incomplete = training_subjects(c, true);
  CHECK(all.size() == 12);
  for (auto k : incomplete) CHECK_FALSE(c.subjects[k].complete());
  CHECK(incomplete.size() + c.complete_case_indices().size() == 12);

  NormStats stats = standardization_stats(c, all);
  RecordSet r = build_records(c, all, stats);
  std::size_t expected_rows = 0;
  for (const auto& s : c.subjects) expected_rows += s.observed_count();
  REQUIRE(r.features.rows() == expected_rows);
  for (std::size_t i = 0; i < r.features.rows(); ++i) {
    const Subject& s = c.subjects[r.subject_index[i]];
    CHECK(r.label[i] == s.label);
    const auto& raw = *s.features[r.modality[i]];
    for (std::size_t q = 0; q < 2; ++q) {
      CHECK(r.features(i, q) == doctest::Approx((raw[q] - stats.mean[r.modality[i]][q]) /
                                                stats.stddev[r.modality[i]][q]));
    }
  }
}

TEST_CASE("training is deterministic and independent of the thread count") {
  auto data = small_synthetic(1);
  auto subjects = training_subjects(data.observed, false);
  TrainConfig config = quick_config(5);
  kernels::set_thread_count(1);
  auto a = train_models(data.observed, subjects, config);
  kernels::set_thread_count(3);
  auto b = train_models(data.observed, subjects, config);
  kernels::set_thread_count(0);
  const Manifest& m = data.observed.manifest;
  CHECK(checkpoint_to_json(a.checkpoint, m) == checkpoint_to_json(b.checkpoint, m));
  REQUIRE(a.encoder_log.entries.size() == 5);
  CHECK(a.encoder_log.entries.back().l_total == b.encoder_log.entries.back().l_total);

  config.seed = 4;
  auto c = train_models(data.observed, subjects, config);
  CHECK(checkpoint_to_json(c.checkpoint, m) != checkpoint_to_json(a.checkpoint, m));
}

TEST_CASE("training reduces the objectives") {
  auto data = small_synthetic(2, 120);
  auto subjects = training_subjects(data.observed, false);
  auto models = train_models(data.observed, subjects, quick_config(60));
  const auto& enc = models.encoder_log.entries;
  const auto& dec = models.decoder_log.entries;
  REQUIRE(enc.size() == 60);
  CHECK(enc.back().l_contrastive < enc.front().l_contrastive);
  CHECK(enc.back().l_mc < enc.front().l_mc);
  CHECK(dec.back().l_total < dec.front().l_total);
  // The adversary is held near chance: cross-entropy stays close to ln S.
  CHECK(enc.back().l_da > 0.8 * std::log(4.0));
  for (const auto& e : enc) {
    CHECK(std::isfinite(e.l_total));
    CHECK(e.l_total == doctest::Approx(e.l_da + e.l_contrastive + e.l_mc));
    CHECK(e.contrastive_skipped == 0);
  }
  const auto& h = models.checkpoint.hparams;
  CHECK(h.loss_mode == "ocl");
  CHECK(h.seed == 3);
  CHECK(models.checkpoint.manifest_sha == data.observed.manifest.fingerprint());
  // Statistics come from the training subjects only.
  CHECK(models.checkpoint.encoder.stats == standardization_stats(data.observed, subjects));
}

TEST_CASE("disabling the coherence term") {
  auto data = small_synthetic(3);
  auto subjects = training_subjects(data.observed, false);
  TrainConfig config = quick_config(3);
  config.use_mc = false;
  auto models = train_models(data.observed, subjects, config);
  for (const auto& e : models.encoder_log.entries) CHECK(e.l_mc == 0.0);
  CHECK_FALSE(models.checkpoint.hparams.use_mc);
}

TEST_CASE("decoder phase leaves the encoder untouched") {
  auto data = small_synthetic(4);
  auto subjects = training_subjects(data.observed, false);
  TrainConfig config = quick_config(3);
  auto enc = train_encoder(data.observed, subjects, config);
  const Manifest& m = data.observed.manifest;
  Checkpoint before;
  before.manifest_sha = m.fingerprint();
  before.encoder = enc.encoder;
  before.classifier = enc.classifier;
  Rng rng(1);
  before.decoder = Decoder(8, 4, 16, 6, rng);
  const std::string text = checkpoint_to_json(before, m);
  auto dec = train_decoder(data.observed, subjects, enc.encoder, config);
  CHECK(checkpoint_to_json(before, m) == text);
  CHECK(dec.decoder.output_dim() == 6);
  CHECK(dec.decoder.modalities() == 4);
}

TEST_CASE("training log csv and cadence") {
  auto data = small_synthetic(5);
  auto subjects = training_subjects(data.observed, false);
  TrainConfig config = quick_config(7);
  config.log_every = 3;
  auto models = train_models(data.observed, subjects, config);
  std::vector<std::size_t> epochs;
  for (const auto& e : models.encoder_log.entries) epochs.push_back(e.epoch);
  CHECK(epochs == std::vector<std::size_t>{3, 6, 7});

  const std::string enc = models.encoder_log.to_csv(false);
  const std::string dec = models.decoder_log.to_csv(true);
  CHECK(enc.rfind("epoch,l_da,l_contrastive,l_mc,l_e,grad_norm,seconds\n", 0) == 0);
  CHECK(dec.rfind("epoch,l_d,grad_norm,seconds\n", 0) == 0);
  std::istringstream lines(enc);
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    ++count;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
  }
  CHECK(count == 4);
}

TEST_CASE("training rejects empty subject sets") {
  auto data = small_synthetic(6);
  std::vector<std::size_t> none;
  CHECK_THROWS_AS(train_encoder(data.observed, none, quick_config()), CoverageError);
}

TEST_CASE("two epochs on the fixture are reproducible bit for bit") {
  const std::filesystem::path dir = OCL_FIXTURE_DIR;
  RunConfig config = load_run_config(dir / "config.json");
  Manifest m = load_manifest(dir / "manifest.json");
  Cohort cohort = load_cohort(dir / "features.csv", m);
  TrainConfig tc = config.resolved_train();
  tc.epochs = 2;
  auto subjects = training_subjects(cohort, config.exclude_complete_cases);
  auto a = train_models(cohort, subjects, tc);
  auto b = train_models(cohort, subjects, tc);
  CHECK(checkpoint_to_json(a.checkpoint, m) == checkpoint_to_json(b.checkpoint, m));
  auto pa = a.checkpoint.encoder.parameters();
  auto pb = b.checkpoint.encoder.parameters();
  auto da = a.checkpoint.decoder.parameters();
  auto db = b.checkpoint.decoder.parameters();
  pa.insert(pa.end(), da.begin(), da.end());
  pb.insert(pb.end(), db.begin(), db.end());
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const Matrix& x = pa[i]->value;
    const Matrix& y = pb[i]->value;
    REQUIRE(x.size() == y.size());
    CHECK(std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0);
  }
}
