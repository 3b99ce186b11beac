#include "ocl/training.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <numeric>

#include "ocl/errors.hpp"
#include "ocl/optimizer.hpp"
#include "ocl/random.hpp"

namespace ocl {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), source.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = source.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& source, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(source[r]);
  return out;
}

bool should_log(std::size_t epoch, const TrainConfig& config) {
  return epoch % config.log_every == 0 || epoch == config.epochs;
}

// Seeds of the independent streams used by one training run.
struct Streams {
  std::uint64_t encoder_init;
  std::uint64_t classifier_init;
  std::uint64_t encoder_shuffle;
  std::uint64_t decoder_init;
  std::uint64_t decoder_shuffle;
};

Streams streams_for(std::uint64_t seed) {
  Rng root(seed);
  Streams s{};
  s.encoder_init = root.fork_seed();
  s.classifier_init = root.fork_seed();
  s.encoder_shuffle = root.fork_seed();
  s.decoder_init = root.fork_seed();
  s.decoder_shuffle = root.fork_seed();
  return s;
}

}  // namespace

std::string to_string(LossMode mode) { return mode == LossMode::kOcl ? "ocl" : "scl"; }

LossMode loss_mode_from_string(std::string_view text) {
  if (text == "ocl") return LossMode::kOcl;
  if (text == "scl") return LossMode::kScl;
  throw ConfigError(fmt::format("unknown loss mode '{}' (expected ocl or scl)", text));
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(lambda_rev >= 0.0)) throw ConfigError("lambda_rev must be >= 0");
  if (log_every == 0) throw ConfigError("log_every must be positive");
  if (hidden_width == 0 || embedding_dim == 0) throw ConfigError("network widths must be positive");
}

std::string TrainLog::to_csv(bool decoder_phase) const {
  std::string out = decoder_phase ? "epoch,l_d,grad_norm,seconds\n"
                                  : "epoch,l_da,l_contrastive,l_mc,l_e,grad_norm,seconds\n";
  for (const auto& e : entries) {
    if (decoder_phase) {
      out += fmt::format("{},{},{},{:.3f}\n", e.epoch, e.l_total, e.grad_norm, e.seconds);
    } else {
      out += fmt::format("{},{},{},{},{},{},{:.3f}\n", e.epoch, e.l_da, e.l_contrastive, e.l_mc,
                         e.l_total, e.grad_norm, e.seconds);
    }
  }
  return out;
}

RecordSet build_records(const Cohort& cohort, std::span<const std::size_t> subjects,
                        const NormStats& stats) {
  const std::size_t q_count = cohort.manifest.num_rois;
  std::size_t count = 0;
  for (std::size_t k : subjects) count += cohort.subjects.at(k).observed_count();

  RecordSet records;
  records.features = Matrix(count, q_count);
  std::size_t row = 0;
  for (std::size_t k : subjects) {
    const Subject& s = cohort.subjects[k];
    for (std::size_t t = 0; t < s.features.size(); ++t) {
      if (!s.features[t]) continue;
      stats.standardize_into(*s.features[t], t, records.features.row(row));
      records.subject_index.push_back(k);
      records.modality.push_back(t);
      records.label.push_back(s.label);
      ++row;
    }
  }
  return records;
}

std::vector<std::size_t> training_subjects(const Cohort& cohort, bool exclude_complete_cases) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < cohort.subjects.size(); ++k) {
    if (!exclude_complete_cases || !cohort.subjects[k].complete()) out.push_back(k);
  }
  return out;
}

EncoderTraining train_encoder(const Cohort& cohort, std::span<const std::size_t> subjects,
                              const TrainConfig& config) {
  config.validate();
  if (subjects.empty()) throw CoverageError("no training subjects");
  const auto start = Clock::now();
  const Streams streams = streams_for(config.seed);
  const std::size_t s_count = cohort.manifest.num_modalities();

  NormStats stats = standardization_stats(cohort, subjects);
  const RecordSet records = build_records(cohort, subjects, stats);

  Rng init_rng(streams.encoder_init);
  Encoder encoder(cohort.manifest.num_rois, config.hidden_width, config.embedding_dim, init_rng);
  encoder.stats = std::move(stats);
  Rng classifier_rng(streams.classifier_init);
  DomainClassifier classifier(config.embedding_dim, config.hidden_width, s_count, classifier_rng);

  std::vector<Parameter*> params = encoder.parameters();
  for (Parameter* p : classifier.parameters()) params.push_back(p);
  AdamW optimizer({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});

  losses::EncoderLossOptions loss_options;
  loss_options.contrastive.tau = config.tau;
  loss_options.contrastive.mode = config.loss_mode == LossMode::kOcl
                                      ? losses::ContrastiveMode::kOrdinal
                                      : losses::ContrastiveMode::kSupervised;
  loss_options.lambda_rev = config.lambda_rev;
  loss_options.use_mc = config.use_mc;

  Rng shuffle_rng(streams.encoder_shuffle);
  std::vector<std::size_t> order(records.features.rows());
  std::iota(order.begin(), order.end(), 0);

  EncoderTraining out;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochLog entry;
    entry.epoch = epoch;
    double weight_total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);

      losses::LabeledBatch batch;
      batch.labels = gather(records.label, rows);
      batch.modality_ids = gather(records.modality, rows);
      batch.subject_ids = gather(records.subject_index, rows);

      Tape tape;
      Var x = tape.constant(gather_rows(records.features, rows));
      Var z = encoder.forward(tape, x);
      auto loss = losses::encoder_loss(tape, z, batch, classifier, loss_options);
      GradientMap grads = tape.backward(loss.total);

      double sq = 0.0;
      for (const Parameter* p : encoder.parameters()) {
        const double n = frobenius_norm(grads.at(p->name));
        sq += n * n;
      }
      optimizer.step(params, grads);

      const double w = static_cast<double>(rows.size());
      weight_total += w;
      entry.l_da += w * loss.report.l_da;
      entry.l_contrastive += w * loss.report.l_contrastive;
      entry.l_mc += w * loss.report.l_mc;
      entry.l_total += w * loss.report.l_e;
      entry.grad_norm += w * std::sqrt(sq);
      entry.contrastive_skipped += loss.report.contrastive_skipped ? 1 : 0;
    }
    if (should_log(epoch, config)) {
      entry.l_da /= weight_total;
      entry.l_contrastive /= weight_total;
      entry.l_mc /= weight_total;
      entry.l_total /= weight_total;
      entry.grad_norm /= weight_total;
      entry.seconds = elapsed(start);
      out.log.entries.push_back(entry);
    }
  }
  out.log.seconds = elapsed(start);
  out.encoder = std::move(encoder);
  out.classifier = std::move(classifier);
  return out;
}

DecoderTraining train_decoder(const Cohort& cohort, std::span<const std::size_t> subjects,
                              const Encoder& encoder, const TrainConfig& config) {
  config.validate();
  if (subjects.empty()) throw CoverageError("no training subjects");
  const auto start = Clock::now();
  const Streams streams = streams_for(config.seed);

  const RecordSet records = build_records(cohort, subjects, encoder.stats);
  // The encoder is frozen: embed everything once, outside any tape.
  const Matrix embeddings = encoder.encode(records.features, records.modality);

  Rng init_rng(streams.decoder_init);
  Decoder decoder(encoder.embedding_dim(), cohort.manifest.num_modalities(), config.hidden_width,
                  cohort.manifest.num_rois, init_rng);
  std::vector<Parameter*> params = decoder.parameters();
  AdamW optimizer({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});

  Rng shuffle_rng(streams.decoder_shuffle);
  std::vector<std::size_t> order(records.features.rows());
  std::iota(order.begin(), order.end(), 0);

  DecoderTraining out;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochLog entry;
    entry.epoch = epoch;
    double weight_total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const auto modalities = gather(records.modality, rows);

      Tape tape;
      Var z = tape.constant(gather_rows(embeddings, rows));
      Var loss = losses::decoder_loss(tape, gather_rows(records.features, rows), z, modalities,
                                      decoder);
      const double value = scalar(tape, loss);
      GradientMap grads = tape.backward(loss);
      double sq = 0.0;
      for (const auto& [name, g] : grads) {
        const double n = frobenius_norm(g);
        sq += n * n;
      }
      optimizer.step(params, grads);

      const double w = static_cast<double>(rows.size());
      weight_total += w;
      entry.l_total += w * value;
      entry.grad_norm += w * std::sqrt(sq);
    }
    if (should_log(epoch, config)) {
      entry.l_total /= weight_total;
      entry.grad_norm /= weight_total;
      entry.seconds = elapsed(start);
      out.log.entries.push_back(entry);
    }
  }
  out.log.seconds = elapsed(start);
  out.decoder = std::move(decoder);
  return out;
}

TrainedModels train_models(const Cohort& cohort, std::span<const std::size_t> subjects,
                           const TrainConfig& config) {
  auto phase_a = train_encoder(cohort, subjects, config);
  auto phase_b = train_decoder(cohort, subjects, phase_a.encoder, config);

  TrainedModels out;
  out.checkpoint.manifest_sha = cohort.manifest.fingerprint();
  out.checkpoint.hparams = Hyperparameters{config.tau,          config.hidden_width,
                                           config.embedding_dim, config.seed,
                                           to_string(config.loss_mode), config.use_mc,
                                           config.lambda_rev};
  out.checkpoint.encoder = std::move(phase_a.encoder);
  out.checkpoint.decoder = std::move(phase_b.decoder);
  out.checkpoint.classifier = std::move(phase_a.classifier);
  out.encoder_log = std::move(phase_a.log);
  out.decoder_log = std::move(phase_b.log);
  return out;
}

}  // namespace ocl
