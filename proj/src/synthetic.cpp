#include "ocl/synthetic.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>

#include "ocl/errors.hpp"
#include "ocl/random.hpp"

namespace ocl {

void SyntheticSpec::validate() const {
  if (subjects < 1) throw ConfigError("synthetic cohort needs at least one subject");
  if (rois < 1) throw ConfigError("synthetic cohort needs at least one ROI");
  if (modalities < 2) throw ConfigError("synthetic cohort needs at least 2 modalities");
  if (labels < 2) throw ConfigError("synthetic cohort needs at least 2 labels");
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
  if (!retention.empty()) {
    if (retention.size() != modalities) {
      throw ConfigError(fmt::format("retention has {} rows for {} modalities", retention.size(),
                                    modalities));
    }
    for (const auto& row : retention) {
      if (row.size() != labels) {
        throw ConfigError(fmt::format("retention row has {} entries for {} labels", row.size(),
                                      labels));
      }
      for (double p : row) {
        if (!(p > 0.0 && p <= 1.0)) {
          throw ConfigError(fmt::format("retention probability {} outside (0, 1]", p));
        }
      }
    }
  }
}

double SyntheticSpec::retention_at(std::size_t modality, std::size_t label) const {
  return retention.empty() ? 0.7 : retention.at(modality).at(label);
}

Manifest SyntheticSpec::manifest() const {
  Manifest m;
  m.num_rois = rois;
  if (modalities != 4) {
    m.modalities.clear();
    for (std::size_t s = 0; s < modalities; ++s) m.modalities.push_back(fmt::format("M{}", s));
  }
  if (labels != 4) {
    m.labels.clear();
    for (std::size_t v = 0; v < labels; ++v) m.labels.push_back(fmt::format("L{}", v));
  }
  return m;
}

std::vector<std::vector<double>> adni_like_retention() {
  // Per-label sample sizes, rows CT, TAU, FDG, AMY; columns CN, EMCI, LMCI, AD.
  constexpr std::array<std::array<double, 4>, 4> counts{{{844, 490, 250, 240},
                                                         {237, 186, 105, 85},
                                                         {861, 597, 1138, 755},
                                                         {735, 833, 447, 422}}};
  std::vector<std::vector<double>> out(4, std::vector<double>(4));
  for (std::size_t v = 0; v < 4; ++v) {
    double best = 0.0;
    for (std::size_t s = 0; s < 4; ++s) best = std::max(best, counts[s][v]);
    for (std::size_t s = 0; s < 4; ++s) out[s][v] = counts[s][v] / best;
  }
  return out;
}

SyntheticCohort generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t k_count = spec.subjects;
  const std::size_t q_count = spec.rois;
  const std::size_t s_count = spec.modalities;
  const std::size_t v_count = spec.labels;
  const std::size_t l_count = spec.latent_dim;

  Rng rng(spec.seed);

  // Modality maps, drawn first so they depend on the seed only.
  std::vector<Matrix> loadings;  // Q x L
  std::vector<std::vector<double>> offsets;
  std::vector<double> scales;
  for (std::size_t s = 0; s < s_count; ++s) {
    Matrix a(q_count, l_count);
    for (std::size_t q = 0; q < q_count; ++q) {
      for (std::size_t l = 0; l < l_count; ++l) {
        a(q, l) = rng.normal() * (l == 0 ? spec.progression_loading : 1.0);
      }
    }
    loadings.push_back(std::move(a));
    scales.push_back(rng.uniform(0.2, 1.0));
    std::vector<double> b(q_count);
    for (double& v : b) v = rng.uniform(0.5, 3.0);
    offsets.push_back(std::move(b));
  }

  SyntheticCohort out;
  const Manifest manifest = spec.manifest();
  out.observed.manifest = manifest;
  out.ground_truth.manifest = manifest;
  for (std::size_t s = 0; s < s_count; ++s) {
    std::vector<double> dir(q_count);
    for (std::size_t q = 0; q < q_count; ++q) dir[q] = scales[s] * loadings[s](q, 0);
    out.progression_direction.push_back(std::move(dir));
  }

  std::vector<double> latent(l_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    Subject subject;
    subject.id = fmt::format("S{:05d}", k);
    subject.label = static_cast<std::size_t>(rng.below(v_count));
    const double jitter = rng.uniform(-0.3, 0.3);
    latent[0] = (static_cast<double>(subject.label) + jitter) / static_cast<double>(v_count - 1);
    for (std::size_t l = 1; l < l_count; ++l) latent[l] = rng.normal();
    out.severity.push_back(latent[0]);

    subject.features.resize(s_count);
    for (std::size_t s = 0; s < s_count; ++s) {
      std::vector<double> x(q_count);
      for (std::size_t q = 0; q < q_count; ++q) {
        double acc = 0.0;
        for (std::size_t l = 0; l < l_count; ++l) acc += loadings[s](q, l) * latent[l];
        const double noise = spec.noise_std > 0.0 ? rng.normal(0.0, spec.noise_std) : 0.0;
        x[q] = scales[s] * (acc + noise) + offsets[s][q];
      }
      subject.features[s] = std::move(x);
    }

    Subject masked = subject;
    while (true) {
      std::size_t kept = 0;
      for (std::size_t s = 0; s < s_count; ++s) {
        const bool keep = rng.uniform() < spec.retention_at(s, subject.label);
        masked.features[s] = keep ? subject.features[s] : std::nullopt;
        kept += keep ? 1 : 0;
      }
      if (kept > 0) break;
    }
    out.ground_truth.subjects.push_back(std::move(subject));
    out.observed.subjects.push_back(std::move(masked));
  }
  return out;
}

}  // namespace ocl
