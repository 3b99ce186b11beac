#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ocl/checkpoint.hpp"
#include "ocl/cohort.hpp"
#include "ocl/losses.hpp"
#include "ocl/model.hpp"

namespace ocl {

enum class LossMode { kOcl, kScl };

std::string to_string(LossMode mode);
LossMode loss_mode_from_string(std::string_view text);  // "ocl" | "scl", throws ConfigError

struct TrainConfig {
  std::size_t epochs = 3000;
  std::size_t batch_size = 4096;
  double lr = 1e-3;
  double weight_decay = 0.05;
  double tau = 0.1;
  double lambda_rev = 1.0;
  LossMode loss_mode = LossMode::kOcl;
  bool use_mc = true;
  std::uint64_t seed = 0;
  std::size_t log_every = 1;
  std::size_t hidden_width = 128;
  std::size_t embedding_dim = 128;

  void validate() const;  // throws ConfigError
};

/// Aggregates over one epoch, weighted by batch size. For the decoder phase only
/// `l_total` (L_D) and `grad_norm` are populated.
struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double l_da = 0.0;
  double l_contrastive = 0.0;
  double l_mc = 0.0;
  double l_total = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;  // wall clock since the phase started
  std::size_t contrastive_skipped = 0;
};

struct TrainLog {
  std::vector<EpochLog> entries;
  double seconds = 0.0;
  std::string checkpoint_path;

  /// Columns: epoch,l_da,l_contrastive,l_mc,l_e,grad_norm,seconds for the encoder
  /// phase, and epoch,l_d,grad_norm,seconds for the decoder phase.
  std::string to_csv(bool decoder_phase) const;
};

/// (subject, modality) records of the chosen subjects, standardized with `stats`.
struct RecordSet {
  Matrix features;  // standardized, one row per record
  std::vector<std::size_t> subject_index;
  std::vector<std::size_t> modality;
  std::vector<std::size_t> label;
};

RecordSet build_records(const Cohort& cohort, std::span<const std::size_t> subjects,
                        const NormStats& stats);

/// All subjects, or only those with at least one missing modality.
std::vector<std::size_t> training_subjects(const Cohort& cohort, bool exclude_complete_cases);

struct EncoderTraining {
  Encoder encoder;
  DomainClassifier classifier;
  TrainLog log;
};

/// Phase (a): E and C_DC trained jointly on L_E, with C_DC's gradient reversed
/// into E. Normalization statistics come from `subjects` and are stored in the
/// returned encoder.
EncoderTraining train_encoder(const Cohort& cohort, std::span<const std::size_t> subjects,
                              const TrainConfig& config);

struct DecoderTraining {
  Decoder decoder;
  TrainLog log;
};

/// Phase (b): D trained on self-reconstruction from the frozen encoder's
/// embeddings. The encoder never appears on the tape.
DecoderTraining train_decoder(const Cohort& cohort, std::span<const std::size_t> subjects,
                              const Encoder& encoder, const TrainConfig& config);

struct TrainedModels {
  Checkpoint checkpoint;
  TrainLog encoder_log;
  TrainLog decoder_log;
};

/// Both phases in order.
TrainedModels train_models(const Cohort& cohort, std::span<const std::size_t> subjects,
                           const TrainConfig& config);

}  // namespace ocl
