#include "ocl/losses.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ocl/errors.hpp"
#include "ocl/kernels.hpp"

namespace ocl::losses {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

}  // namespace

void LabeledBatch::validate(std::size_t num_labels, std::size_t num_modalities) const {
  const std::size_t b = embeddings.rows();
  if (labels.size() != b || modality_ids.size() != b || subject_ids.size() != b) {
    throw DimensionError(fmt::format(
        "batch of {} rows has {} labels, {} modality ids, {} subject ids", b, labels.size(),
        modality_ids.size(), subject_ids.size()));
  }
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= num_labels) {
      throw LabelError(fmt::format("label {} outside [0, {})", labels[i], num_labels));
    }
    if (modality_ids[i] >= num_modalities) {
      throw LabelError(
          fmt::format("modality id {} outside [0, {})", modality_ids[i], num_modalities));
    }
    const double norm = std::sqrt(dot(embeddings.row(i), embeddings.row(i)));
    if (std::abs(norm - 1.0) > 1e-6) {
      throw DegenerateEmbeddingError(fmt::format("batch row {} has norm {}", i, norm));
    }
  }
}

std::size_t label_distance(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

double adaptive_positive_temperature(std::span<const NegativeTerm> negatives,
                                     double fallback_tau) {
  if (negatives.empty()) return fallback_tau;
  double shift = -std::numeric_limits<double>::infinity();
  for (const auto& n : negatives) shift = std::max(shift, n.similarity / n.tau);
  double numerator = 0.0;
  double denominator = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& n : negatives) {
    const double w = std::exp(n.similarity / n.tau - shift);
    numerator += w;
    denominator += w / n.tau;
    lo = std::min(lo, n.tau);
    hi = std::max(hi, n.tau);
  }
  // A weighted harmonic mean; clamping only removes rounding.
  return std::clamp(numerator / denominator, lo, hi);
}

double adaptive_positive_temperature(std::span<const double> anchor,
                                     std::span<const NegativeSample> negatives,
                                     double fallback_tau) {
  std::vector<NegativeTerm> terms;
  terms.reserve(negatives.size());
  for (const auto& n : negatives) {
    if (n.embedding.size() != anchor.size()) {
      throw DimensionError(fmt::format("negative of dimension {} for anchor of dimension {}",
                                       n.embedding.size(), anchor.size()));
    }
    terms.push_back({dot(anchor, n.embedding), n.tau});
  }
  return adaptive_positive_temperature(terms, fallback_tau);
}

ContrastiveResult contrastive_loss(const Matrix& embeddings, std::span<const std::size_t> labels,
                                   const ContrastiveOptions& options) {
  const std::size_t b = embeddings.rows();
  if (labels.size() != b) {
    throw DimensionError(fmt::format("{} labels for {} embeddings", labels.size(), b));
  }
  if (b < 2) throw InsufficientBatchError(fmt::format("contrastive loss needs >= 2 rows, got {}", b));
  if (!(options.tau > 0.0)) throw ConfigError(fmt::format("tau must be positive, got {}", options.tau));
  if (options.frozen_positive_tau && options.frozen_positive_tau->size() != b) {
    throw DimensionError("frozen positive temperatures must have one entry per row");
  }

  ContrastiveResult result;
  result.gradient = Matrix(b, embeddings.cols());
  result.positive_tau.assign(b, kNaN);

  const bool single_label =
      std::all_of(labels.begin(), labels.end(), [&](std::size_t y) { return y == labels[0]; });
  if (single_label) return result;

  const bool ordinal = options.mode == ContrastiveMode::kOrdinal;
  const double tau = options.tau;

  // coeff(i, j) = d loss_i / d (z_i . z_j); starts as the similarity matrix.
  Matrix coeff = matmul_transposed_b(embeddings, embeddings);
  std::vector<double> anchor_loss(b, 0.0);
  std::vector<char> used(b, 0);
  std::vector<char> fallback(b, 0);

  const long long rows = static_cast<long long>(b);
#pragma omp parallel for schedule(static) num_threads(kernels::thread_count())
  for (long long ii = 0; ii < rows; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    auto row = coeff.row(i);
    std::size_t positives = 0;
    std::size_t negatives = 0;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      (labels[j] == labels[i] ? positives : negatives) += 1;
    }
    if (positives == 0) {
      std::fill(row.begin(), row.end(), 0.0);
      continue;
    }

    auto inv_negative_tau = [&](std::size_t j) {
      return ordinal ? static_cast<double>(label_distance(labels[i], labels[j])) / tau
                     : 1.0 / tau;
    };

    double tau_p = tau;
    if (options.frozen_positive_tau) {
      tau_p = (*options.frozen_positive_tau)[i];
    } else if (negatives == 0) {
      fallback[i] = 1;
    } else if (ordinal) {
      double shift = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < b; ++j) {
        if (j == i || labels[j] == labels[i]) continue;
        shift = std::max(shift, row[j] * inv_negative_tau(j));
      }
      double numerator = 0.0;
      double denominator = 0.0;
      std::size_t near = std::numeric_limits<std::size_t>::max();
      std::size_t far = 0;
      for (std::size_t j = 0; j < b; ++j) {
        if (j == i || labels[j] == labels[i]) continue;
        const double inv_t = inv_negative_tau(j);
        const double w = std::exp(row[j] * inv_t - shift);
        numerator += w;
        denominator += w * inv_t;
        near = std::min(near, label_distance(labels[i], labels[j]));
        far = std::max(far, label_distance(labels[i], labels[j]));
      }
      tau_p = std::clamp(numerator / denominator, tau / static_cast<double>(far),
                         tau / static_cast<double>(near));
    }
    result.positive_tau[i] = tau_p;
    const double inv_tau_p = 1.0 / tau_p;

    // Row now holds logits s_ij / t_ij; the anchor itself is excluded.
    double max_logit = -std::numeric_limits<double>::infinity();
    double positive_sum = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      const bool positive = labels[j] == labels[i];
      row[j] *= positive ? inv_tau_p : inv_negative_tau(j);
      if (positive) positive_sum += row[j];
      max_logit = std::max(max_logit, row[j]);
    }
    // Then the shifted exponentials.
    double denom = 0.0;
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      row[j] = std::exp(row[j] - max_logit);
      denom += row[j];
    }
    const double log_denom = max_logit + std::log(denom);
    const double inv_denom = 1.0 / denom;
    const double inv_pos = 1.0 / static_cast<double>(positives);
    anchor_loss[i] = log_denom - inv_pos * positive_sum;

    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) {
        row[j] = 0.0;
        continue;
      }
      const bool positive = labels[j] == labels[i];
      const double inv_t = positive ? inv_tau_p : inv_negative_tau(j);
      double g = row[j] * inv_denom * inv_t;
      if (positive) g -= inv_pos * inv_tau_p;
      row[j] = g;
    }
    used[i] = 1;
  }

  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    if (!used[i]) continue;
    ++result.anchors_used;
    result.anchors_fallback += fallback[i] ? 1 : 0;
    total += anchor_loss[i];
  }
  if (result.anchors_used == 0) return result;
  const double inv_used = 1.0 / static_cast<double>(result.anchors_used);
  result.loss = total * inv_used;

  // d loss / d Z = (C + C^T) Z / anchors_used
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      const double s = (coeff(i, j) + coeff(j, i)) * inv_used;
      coeff(i, j) = s;
      coeff(j, i) = s;
    }
    coeff(i, i) *= 2.0 * inv_used;
  }
  result.gradient = matmul(coeff, embeddings);
  return result;
}

ContrastiveResult supervised_contrastive_loss(const Matrix& embeddings,
                                              std::span<const std::size_t> labels, double tau) {
  return contrastive_loss(embeddings, labels, {tau, ContrastiveMode::kSupervised, std::nullopt});
}

ContrastiveResult ordinal_contrastive_loss(const Matrix& embeddings,
                                           std::span<const std::size_t> labels, double tau) {
  return contrastive_loss(embeddings, labels, {tau, ContrastiveMode::kOrdinal, std::nullopt});
}

CoherenceResult modality_coherence_loss(const Matrix& embeddings,
                                        std::span<const std::size_t> subject_ids,
                                        std::span<const std::size_t> modality_ids) {
  const std::size_t b = embeddings.rows();
  if (subject_ids.size() != b || modality_ids.size() != b) {
    throw DimensionError(fmt::format("{} subject ids and {} modality ids for {} rows",
                                     subject_ids.size(), modality_ids.size(), b));
  }
  CoherenceResult result;
  result.gradient = Matrix(b, embeddings.cols());

  std::vector<std::size_t> order(b);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return subject_ids[x] < subject_ids[y]; });

  std::vector<double> norms(b);
  for (std::size_t i = 0; i < b; ++i) {
    norms[i] = std::sqrt(dot(embeddings.row(i), embeddings.row(i)));
  }

  double total = 0.0;
  // Cosine is symmetric, so each unordered pair stands for its two ordered pairs.
  for (std::size_t start = 0; start < b;) {
    std::size_t end = start + 1;
    while (end < b && subject_ids[order[end]] == subject_ids[order[start]]) ++end;
    for (std::size_t x = start; x < end; ++x) {
      for (std::size_t y = x + 1; y < end; ++y) {
        const std::size_t i = order[x];
        const std::size_t j = order[y];
        if (modality_ids[i] == modality_ids[j]) continue;
        const auto zi = embeddings.row(i);
        const auto zj = embeddings.row(j);
        const double inv = 1.0 / (norms[i] * norms[j]);
        const double cosine = dot(zi, zj) * inv;
        total += 2.0 * cosine;
        result.pairs += 2;
        auto gi = result.gradient.row(i);
        auto gj = result.gradient.row(j);
        for (std::size_t k = 0; k < zi.size(); ++k) {
          // d cos / d z_i = z_j / (|z_i||z_j|) - cos * z_i / |z_i|^2
          gi[k] += 2.0 * (zj[k] * inv - cosine * zi[k] / (norms[i] * norms[i]));
          gj[k] += 2.0 * (zi[k] * inv - cosine * zj[k] / (norms[j] * norms[j]));
        }
      }
    }
    start = end;
  }
  if (result.pairs == 0) return result;
  const double scale = -1.0 / static_cast<double>(result.pairs);
  result.loss = total * scale;
  result.gradient *= scale;
  return result;
}

Var contrastive_loss(Tape& tape, Var embeddings, std::span<const std::size_t> labels,
                     const ContrastiveOptions& options, ContrastiveResult* info) {
  ContrastiveResult r = contrastive_loss(tape.value(embeddings), labels, options);
  const double loss = r.loss;
  Matrix gradient = std::move(r.gradient);
  if (info) {
    r.gradient = gradient;
    *info = std::move(r);
  }
  return tape.record(Matrix(1, 1, loss),
                     [embeddings, gradient = std::move(gradient)](const Matrix& g, Tape& t) {
                       Matrix gz = gradient;
                       gz *= g(0, 0);
                       t.accumulate(embeddings, std::move(gz));
                     });
}

Var modality_coherence_loss(Tape& tape, Var embeddings, std::span<const std::size_t> subject_ids,
                            std::span<const std::size_t> modality_ids, CoherenceResult* info) {
  CoherenceResult r = modality_coherence_loss(tape.value(embeddings), subject_ids, modality_ids);
  const double loss = r.loss;
  Matrix gradient = std::move(r.gradient);
  if (info) {
    r.gradient = gradient;
    *info = std::move(r);
  }
  return tape.record(Matrix(1, 1, loss),
                     [embeddings, gradient = std::move(gradient)](const Matrix& g, Tape& t) {
                       Matrix gz = gradient;
                       gz *= g(0, 0);
                       t.accumulate(embeddings, std::move(gz));
                     });
}

Var domain_adversarial_loss(Tape& tape, Var embeddings, std::span<const std::size_t> modality_ids,
                            const DomainClassifier& classifier, double lambda_rev) {
  if (lambda_rev < 0.0) {
    throw ConfigError(fmt::format("lambda_rev must be >= 0, got {}", lambda_rev));
  }
  for (std::size_t id : modality_ids) {
    if (id >= classifier.modalities()) {
      throw LabelError(fmt::format("modality id {} outside [0, {})", id, classifier.modalities()));
    }
  }
  Var reversed = gradient_reversal(tape, embeddings, lambda_rev);
  return softmax_cross_entropy(tape, classifier.forward(tape, reversed), modality_ids);
}

Var decoder_loss(Tape& tape, const Matrix& target, Var embeddings,
                 std::span<const std::size_t> target_modalities, const Decoder& decoder) {
  Var reconstruction = decoder.forward(tape, embeddings, target_modalities);
  return mean_squared_error(tape, reconstruction, target);
}

EncoderLoss encoder_loss(Tape& tape, Var embeddings, const LabeledBatch& batch,
                         const DomainClassifier& classifier, const EncoderLossOptions& options) {
  EncoderLoss out;
  Var total = domain_adversarial_loss(tape, embeddings, batch.modality_ids, classifier,
                                      options.lambda_rev);
  out.report.l_da = scalar(tape, total);

  ContrastiveResult contrastive;
  Var lc = contrastive_loss(tape, embeddings, batch.labels, options.contrastive, &contrastive);
  out.report.n_anchors_used = contrastive.anchors_used;
  out.report.n_anchors_fallback = contrastive.anchors_fallback;
  if (contrastive.defined()) {
    out.report.l_contrastive = contrastive.loss;
    total = add(tape, total, lc);
  } else {
    out.report.contrastive_skipped = true;
  }

  if (options.use_mc) {
    CoherenceResult coherence;
    Var mc = modality_coherence_loss(tape, embeddings, batch.subject_ids, batch.modality_ids,
                                     &coherence);
    out.report.l_mc = coherence.loss;
    out.report.n_mc_pairs = coherence.pairs;
    total = add(tape, total, mc);
  }
  out.report.l_e = scalar(tape, total);
  out.total = total;
  return out;
}

}  // namespace ocl::losses
