#include "ocl/model.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>

#include "ocl/errors.hpp"

namespace ocl {

DenseLayer DenseLayer::glorot(const std::string& name, std::size_t in, std::size_t out,
                              Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Matrix w(in, out);
  for (double& v : w.values()) v = rng.uniform(-limit, limit);
  return DenseLayer{Parameter{name + ".weight", std::move(w), true},
                    Parameter{name + ".bias", Matrix(1, out), false}};
}

Var DenseLayer::forward(Tape& tape, Var input) const {
  return affine(tape, input, tape.parameter(weight), tape.parameter(bias));
}

Matrix DenseLayer::apply(const Matrix& input) const {
  return affine(input, weight.value, bias.value);
}

Mlp::Mlp(const std::string& prefix, std::span<const std::size_t> widths, Rng& rng) {
  if (widths.size() < 2) throw DimensionError("an MLP needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.push_back(
        DenseLayer::glorot(fmt::format("{}.layer{}", prefix, i + 1), widths[i], widths[i + 1], rng));
  }
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DimensionError("an MLP needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.value.rows() != 1 || l.bias.value.cols() != l.outputs()) {
      throw DimensionError(fmt::format("layer {} bias {} does not match weight {}", i + 1,
                                       l.bias.value.shape_string(), l.weight.value.shape_string()));
    }
    if (i > 0 && layers_[i - 1].outputs() != l.inputs()) {
      throw DimensionError(fmt::format("layer {} expects {} inputs but receives {}", i + 1,
                                       l.inputs(), layers_[i - 1].outputs()));
    }
  }
}

Var Mlp::forward(Tape& tape, Var input) const {
  Var h = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(tape, h);
    if (i + 1 < layers_.size()) h = relu(tape, h);
  }
  return h;
}

Matrix Mlp::apply(const Matrix& input) const {
  Matrix h = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].apply(h);
    if (i + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

std::vector<Parameter*> Mlp::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Parameter*> Mlp::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

void NormStats::standardize_into(std::span<const double> raw, std::size_t modality,
                                 std::span<double> out) const {
  const auto& mu = mean.at(modality);
  const auto& sd = stddev.at(modality);
  if (raw.size() != mu.size() || out.size() != mu.size()) {
    throw DimensionError(fmt::format("feature vector of length {} for {} ROIs", raw.size(),
                                     mu.size()));
  }
  for (std::size_t q = 0; q < raw.size(); ++q) out[q] = (raw[q] - mu[q]) / sd[q];
}

void NormStats::destandardize_into(std::span<const double> standardized,
                                   std::size_t modality, std::span<double> out) const {
  const auto& mu = mean.at(modality);
  const auto& sd = stddev.at(modality);
  if (standardized.size() != mu.size() || out.size() != mu.size()) {
    throw DimensionError(fmt::format("feature vector of length {} for {} ROIs",
                                     standardized.size(), mu.size()));
  }
  for (std::size_t q = 0; q < standardized.size(); ++q) {
    out[q] = standardized[q] * sd[q] + mu[q];
  }
}

std::vector<double> NormStats::standardize(std::span<const double> raw,
                                           std::size_t modality) const {
  std::vector<double> out(raw.size());
  standardize_into(raw, modality, out);
  return out;
}

std::vector<double> NormStats::destandardize(std::span<const double> standardized,
                                             std::size_t modality) const {
  std::vector<double> out(standardized.size());
  destandardize_into(standardized, modality, out);
  return out;
}

Encoder::Encoder(std::size_t input_dim, std::size_t hidden, std::size_t embedding_dim,
                 Rng& rng) {
  const std::array<std::size_t, 3> widths{input_dim, hidden, embedding_dim};
  net_ = Mlp("encoder", widths, rng);
}

Encoder::Encoder(Mlp network, NormStats norm) : stats(std::move(norm)), net_(std::move(network)) {
  if (net_.layers().size() != 2) throw DimensionError("the encoder has exactly two layers");
  if (stats.rois() != net_.inputs()) {
    throw DimensionError(fmt::format("normalization stats cover {} ROIs, encoder expects {}",
                                     stats.rois(), net_.inputs()));
  }
}

Var Encoder::forward(Tape& tape, Var standardized) const {
  return l2_normalize_rows(tape, net_.forward(tape, standardized));
}

Matrix Encoder::encode(const Matrix& standardized,
                       std::span<const std::size_t> modality_ids) const {
  if (modality_ids.size() != standardized.rows()) {
    throw DimensionError(fmt::format("{} modality ids for {} rows", modality_ids.size(),
                                     standardized.rows()));
  }
  for (std::size_t id : modality_ids) {
    if (id >= stats.modalities()) {
      throw LabelError(
          fmt::format("unknown modality id {} (encoder knows {})", id, stats.modalities()));
    }
  }
  if (!standardized.all_finite()) throw NumericError("non-finite encoder input");
  return l2_normalize_rows(net_.apply(standardized));
}

Decoder::Decoder(std::size_t embedding_dim, std::size_t modalities, std::size_t hidden,
                 std::size_t output_dim, Rng& rng)
    : modalities_(modalities) {
  const std::array<std::size_t, 3> widths{embedding_dim + modalities, hidden, output_dim};
  net_ = Mlp("decoder", widths, rng);
}

Decoder::Decoder(Mlp network, std::size_t modalities)
    : modalities_(modalities), net_(std::move(network)) {
  if (net_.layers().size() != 2) throw DimensionError("the decoder has exactly two layers");
  if (net_.inputs() <= modalities_) {
    throw DimensionError("decoder input must hold an embedding plus the condition vector");
  }
}

Var Decoder::forward(Tape& tape, Var embedding,
                     std::span<const std::size_t> target_modalities) const {
  Var condition = tape.constant(one_hot(target_modalities, modalities_));
  return net_.forward(tape, concat_cols(tape, embedding, condition));
}

Matrix Decoder::decode(const Matrix& embedding, std::size_t target_modality) const {
  std::vector<std::size_t> ids(embedding.rows(), target_modality);
  return decode(embedding, ids);
}

Matrix Decoder::decode(const Matrix& embedding,
                       std::span<const std::size_t> target_modalities) const {
  if (target_modalities.size() != embedding.rows()) {
    throw DimensionError(fmt::format("{} target modalities for {} rows",
                                     target_modalities.size(), embedding.rows()));
  }
  return net_.apply(concat_cols(embedding, one_hot(target_modalities, modalities_)));
}

DomainClassifier::DomainClassifier(std::size_t embedding_dim, std::size_t hidden,
                                   std::size_t modalities, Rng& rng) {
  const std::array<std::size_t, 3> widths{embedding_dim, hidden, modalities};
  net_ = Mlp("domain_classifier", widths, rng);
}

}  // namespace ocl
