#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ocl/matrix.hpp"
#include "ocl/model.hpp"
#include "ocl/tape.hpp"

// Training objectives of the encoder (domain-adversarial, supervised or
// ordinal contrastive, modality coherence) and of the conditioned decoder.
//
// Labels and modality ids are 0-based indices here. Labels are ordinal: index
// order is severity order, so |a - b| is the label distance.
namespace ocl::losses {

/// One mini-batch of embeddings with its bookkeeping.
struct LabeledBatch {
  Matrix embeddings;                       // B x m, unit-norm rows
  std::vector<std::size_t> labels;         // ordinal label per row
  std::vector<std::size_t> modality_ids;   // modality per row
  std::vector<std::size_t> subject_ids;    // subject key per row

  /// Throws LabelError / DimensionError when ids fall outside the given ranges,
  /// lengths disagree, or a row is not unit-norm within 1e-6.
  void validate(std::size_t num_labels, std::size_t num_modalities) const;
};

std::size_t label_distance(std::size_t a, std::size_t b);

enum class ContrastiveMode { kSupervised, kOrdinal };

struct ContrastiveOptions {
  double tau = 0.1;
  ContrastiveMode mode = ContrastiveMode::kOrdinal;
  /// Replaces the per-anchor positive temperature (one value per row). The
  /// positive temperature is a stop-gradient quantity; holding it fixed lets
  /// finite differences see exactly the function that is differentiated.
  std::optional<std::vector<double>> frozen_positive_tau;
};

struct ContrastiveResult {
  double loss = 0.0;           // mean over anchors with at least one positive
  Matrix gradient;             // d loss / d embeddings
  std::size_t anchors_used = 0;
  std::size_t anchors_fallback = 0;     // anchors without negatives (tau_P = tau)
  std::vector<double> positive_tau;     // per row; NaN where the anchor was skipped

  bool defined() const { return anchors_used > 0; }
};

/// Negative-pair ingredients of the adaptive positive temperature.
struct NegativeTerm {
  double similarity;  // z_i . z_n
  double tau;         // tau_{i,n}
};

/// tau_{i,P} = sum_n exp(s_n / tau_n) / sum_n [exp(s_n / tau_n) / tau_n], a
/// weighted harmonic mean of the negative temperatures. Returns `fallback_tau`
/// when there are no negatives.
double adaptive_positive_temperature(std::span<const NegativeTerm> negatives,
                                     double fallback_tau);

/// Same quantity from the anchor embedding and (embedding, tau_{i,n}) pairs.
struct NegativeSample {
  std::span<const double> embedding;
  double tau;
};
double adaptive_positive_temperature(std::span<const double> anchor,
                                     std::span<const NegativeSample> negatives,
                                     double fallback_tau);

/// Shared kernel behind both contrastive losses. Anchors without positives are
/// skipped; a batch with a single distinct label yields an undefined result
/// (anchors_used == 0, zero gradient). Throws InsufficientBatchError for B < 2.
ContrastiveResult contrastive_loss(const Matrix& embeddings, std::span<const std::size_t> labels,
                                   const ContrastiveOptions& options);

ContrastiveResult supervised_contrastive_loss(const Matrix& embeddings,
                                              std::span<const std::size_t> labels, double tau);
ContrastiveResult ordinal_contrastive_loss(const Matrix& embeddings,
                                           std::span<const std::size_t> labels, double tau);

struct CoherenceResult {
  double loss = 0.0;  // negative mean cosine over ordered cross-modality pairs
  Matrix gradient;
  std::size_t pairs = 0;
};

/// Pairs rows that share a subject but differ in modality. Returns loss 0 and
/// no pairs when none exist.
CoherenceResult modality_coherence_loss(const Matrix& embeddings,
                                        std::span<const std::size_t> subject_ids,
                                        std::span<const std::size_t> modality_ids);

// Tape-recording forms. `info` (optional) receives the bookkeeping.

Var contrastive_loss(Tape& tape, Var embeddings, std::span<const std::size_t> labels,
                     const ContrastiveOptions& options, ContrastiveResult* info = nullptr);
Var modality_coherence_loss(Tape& tape, Var embeddings, std::span<const std::size_t> subject_ids,
                            std::span<const std::size_t> modality_ids,
                            CoherenceResult* info = nullptr);

/// Mean cross-entropy of C_DC on the modality ids, with a gradient reversal
/// layer of strength lambda_rev between the embeddings and the classifier.
Var domain_adversarial_loss(Tape& tape, Var embeddings, std::span<const std::size_t> modality_ids,
                            const DomainClassifier& classifier, double lambda_rev);

/// Mean squared self-reconstruction error of D([z, c_t]) against x_t, averaged
/// over batch and ROI dimensions.
Var decoder_loss(Tape& tape, const Matrix& target, Var embeddings,
                 std::span<const std::size_t> target_modalities, const Decoder& decoder);

struct LossReport {
  double l_da = 0.0;
  double l_contrastive = 0.0;  // L_OC or L_SC
  double l_mc = 0.0;
  double l_e = 0.0;
  double l_d = 0.0;
  double grad_norm_encoder = 0.0;
  std::size_t n_anchors_used = 0;
  std::size_t n_anchors_fallback = 0;
  std::size_t n_mc_pairs = 0;
  bool contrastive_skipped = false;
};

struct EncoderLossOptions {
  ContrastiveOptions contrastive;
  double lambda_rev = 1.0;
  bool use_mc = true;
};

struct EncoderLoss {
  Var total;
  LossReport report;
};

/// L_E = L_DA + L_contrastive + L_MC, each term unweighted. A contrastive term
/// that is undefined on the batch (one distinct label) is left out and flagged.
EncoderLoss encoder_loss(Tape& tape, Var embeddings, const LabeledBatch& batch,
                         const DomainClassifier& classifier, const EncoderLossOptions& options);

}  // namespace ocl::losses
