#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ocl/checkpoint.hpp"
#include "ocl/cohort.hpp"
#include "ocl/model.hpp"

namespace ocl {

enum class CellStatus { kObserved, kImputed, kClassMean };

std::string to_string(CellStatus status);

struct CellProvenance {
  CellStatus status = CellStatus::kObserved;
  std::vector<std::size_t> sources;  // modalities fused to produce an imputed cell
};

struct ImputedCohort {
  Cohort cohort;                                        // every modality present
  std::vector<std::vector<CellProvenance>> provenance;  // [subject][modality]

  bool observed(std::size_t subject, std::size_t modality) const {
    return provenance.at(subject).at(modality).status == CellStatus::kObserved;
  }
  /// Columns: subject_id,modality,status,sources (sources joined with ';').
  std::string provenance_csv() const;
};

/// Fills each missing (subject, modality) from the subject's observed
/// modalities: embed each, average the unit embeddings, re-normalize, decode
/// under the target condition and de-standardize with the target statistics.
ImputedCohort impute(const Cohort& cohort, const Encoder& encoder, const Decoder& decoder);
/// As above; throws FingerprintError if the checkpoint was trained for a
/// different manifest.
ImputedCohort impute(const Cohort& cohort, const Checkpoint& checkpoint);

/// One target vector (raw units) produced from an explicit set of source
/// modalities of `subject`, all of which must be observed.
std::vector<double> impute_from_sources(const Subject& subject,
                                        std::span<const std::size_t> sources,
                                        std::size_t target, const Encoder& encoder,
                                        const Decoder& decoder);

/// Missing (k, t) becomes the mean of modality t over observed subjects with
/// label y_k. Throws CoverageError when such a (label, modality) cell is empty.
ImputedCohort impute_class_mean(const Cohort& cohort);

void save_imputed(const ImputedCohort& imputed, const std::filesystem::path& features_path,
                  const std::filesystem::path& provenance_path);
/// Reads a features CSV plus its provenance CSV back into an ImputedCohort.
ImputedCohort load_imputed(const std::filesystem::path& features_path,
                           const std::filesystem::path& provenance_path,
                           const Manifest& manifest);

}  // namespace ocl
