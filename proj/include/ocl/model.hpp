#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ocl/matrix.hpp"
#include "ocl/random.hpp"
#include "ocl/tape.hpp"

namespace ocl {

struct DenseLayer {
  Parameter weight;
  Parameter bias;

  /// Glorot-uniform weights, zero bias.
  static DenseLayer glorot(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  std::size_t inputs() const { return weight.value.rows(); }
  std::size_t outputs() const { return weight.value.cols(); }

  Var forward(Tape& tape, Var input) const;
  Matrix apply(const Matrix& input) const;
};

/// Affine layers with ReLU between consecutive layers (none after the last).
class Mlp {
 public:
  Mlp() = default;
  /// widths = {in, hidden..., out}; layer i is named "<prefix>.layer<i+1>".
  Mlp(const std::string& prefix, std::span<const std::size_t> widths, Rng& rng);
  /// Adopts existing layers; throws DimensionError if consecutive widths disagree.
  explicit Mlp(std::vector<DenseLayer> layers);

  Var forward(Tape& tape, Var input) const;
  Matrix apply(const Matrix& input) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t inputs() const { return layers_.front().inputs(); }
  std::size_t outputs() const { return layers_.back().outputs(); }

 private:
  std::vector<DenseLayer> layers_;
};

/// Per-modality, per-ROI z-scoring statistics.
struct NormStats {
  std::vector<std::vector<double>> mean;    // [modality][roi]
  std::vector<std::vector<double>> stddev;  // [modality][roi]

  std::size_t modalities() const { return mean.size(); }
  std::size_t rois() const { return mean.empty() ? 0 : mean.front().size(); }

  void standardize_into(std::span<const double> raw, std::size_t modality,
                        std::span<double> out) const;
  void destandardize_into(std::span<const double> standardized, std::size_t modality,
                          std::span<double> out) const;
  std::vector<double> standardize(std::span<const double> raw, std::size_t modality) const;
  std::vector<double> destandardize(std::span<const double> standardized,
                                    std::size_t modality) const;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// E: Q -> H -> m, followed by row normalization. One network serves every
/// modality; modality enters only through the input standardization.
class Encoder {
 public:
  Encoder() = default;
  Encoder(std::size_t input_dim, std::size_t hidden, std::size_t embedding_dim, Rng& rng);
  Encoder(Mlp network, NormStats stats);

  Var forward(Tape& tape, Var standardized) const;
  /// Inference on standardized rows. Validates modality ids against the stored
  /// statistics and rejects non-finite input.
  Matrix encode(const Matrix& standardized, std::span<const std::size_t> modality_ids) const;

  std::size_t input_dim() const { return net_.inputs(); }
  std::size_t embedding_dim() const { return net_.outputs(); }
  std::size_t hidden_width() const { return net_.layers().front().outputs(); }

  std::vector<Parameter*> parameters() { return net_.parameters(); }
  std::vector<const Parameter*> parameters() const { return net_.parameters(); }
  Mlp& network() { return net_; }
  const Mlp& network() const { return net_; }

  NormStats stats;

 private:
  Mlp net_;
};

/// D: [z, c_t] -> H -> Q, outputs in standardized units.
class Decoder {
 public:
  Decoder() = default;
  Decoder(std::size_t embedding_dim, std::size_t modalities, std::size_t hidden,
          std::size_t output_dim, Rng& rng);
  Decoder(Mlp network, std::size_t modalities);

  Var forward(Tape& tape, Var embedding, std::span<const std::size_t> target_modalities) const;
  Matrix decode(const Matrix& embedding, std::size_t target_modality) const;
  Matrix decode(const Matrix& embedding, std::span<const std::size_t> target_modalities) const;

  std::size_t modalities() const { return modalities_; }
  std::size_t output_dim() const { return net_.outputs(); }

  std::vector<Parameter*> parameters() { return net_.parameters(); }
  std::vector<const Parameter*> parameters() const { return net_.parameters(); }
  Mlp& network() { return net_; }
  const Mlp& network() const { return net_; }

 private:
  std::size_t modalities_ = 0;
  Mlp net_;
};

/// C_DC: m -> H -> S modality logits.
class DomainClassifier {
 public:
  DomainClassifier() = default;
  DomainClassifier(std::size_t embedding_dim, std::size_t hidden, std::size_t modalities,
                   Rng& rng);
  explicit DomainClassifier(Mlp network) : net_(std::move(network)) {}

  Var forward(Tape& tape, Var embedding) const { return net_.forward(tape, embedding); }
  Matrix logits(const Matrix& embedding) const { return net_.apply(embedding); }
  std::size_t modalities() const { return net_.outputs(); }

  std::vector<Parameter*> parameters() { return net_.parameters(); }
  std::vector<const Parameter*> parameters() const { return net_.parameters(); }
  Mlp& network() { return net_; }
  const Mlp& network() const { return net_; }

 private:
  Mlp net_;
};

}  // namespace ocl
