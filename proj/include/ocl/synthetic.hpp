#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ocl/cohort.hpp"

namespace ocl {

/// Parameters of the linear-Gaussian progressive cohort.
///
/// Each subject has an ordinal label y, a latent severity
/// u = (y + jitter) / (V - 1) with jitter ~ U(-0.3, 0.3), and a nuisance vector
/// of latent_dim - 1 standard normals shared by all of its modalities. Modality s
/// observes x = scale_s * (A_s [u, nuisance] + noise) + b_s, where A_s, scale_s
/// and b_s are drawn once from the seed and the u-column of A_s is multiplied by
/// progression_loading.
struct SyntheticSpec {
  std::size_t subjects = 2000;   // K
  std::size_t rois = 20;         // Q
  std::size_t modalities = 4;    // S
  std::size_t labels = 4;        // V
  std::size_t latent_dim = 4;    // u plus latent_dim - 1 nuisance factors
  double noise_std = 0.05;
  double progression_loading = 3.0;
  /// retention[modality][label]: probability that a feature vector is kept.
  /// Empty means every entry is 0.7.
  std::vector<std::vector<double>> retention;
  std::uint64_t seed = 0;

  /// Throws ConfigError on invalid sizes or probabilities outside (0, 1].
  void validate() const;
  double retention_at(std::size_t modality, std::size_t label) const;
  /// Default names (CT/TAU/FDG/AMY, CN/EMCI/LMCI/AD) when sizes match, else
  /// generic M<i>/L<i> names.
  Manifest manifest() const;
};

/// Retention probabilities proportional to the per-label sample sizes of a
/// study with TAU scarce and FDG plentiful (CT, TAU, FDG, AMY by CN, EMCI, LMCI, AD),
/// scaled so the best-covered modality of each label is kept with probability 1.
std::vector<std::vector<double>> adni_like_retention();

struct SyntheticCohort {
  Cohort observed;      // after masking
  Cohort ground_truth;  // every modality of every subject, pre-masking
  std::vector<double> severity;  // latent u per subject
  /// Column 0 of each A_s times scale_s: the direction along which the mean of
  /// modality s moves with severity.
  std::vector<std::vector<double>> progression_direction;
};

SyntheticCohort generate_synthetic(const SyntheticSpec& spec);

}  // namespace ocl
