#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocl/model.hpp"

namespace ocl {

/// Names and sizes shared by every artifact of one study. Order is meaningful:
/// labels are listed by increasing severity.
struct Manifest {
  std::vector<std::string> modalities{"CT", "TAU", "FDG", "AMY"};
  std::size_t num_rois = 160;
  std::vector<std::string> labels{"CN", "EMCI", "LMCI", "AD"};

  std::size_t num_modalities() const { return modalities.size(); }
  std::size_t num_labels() const { return labels.size(); }

  /// Throws ConfigError unless S >= 2, V >= 2, Q >= 1 and names are unique.
  void validate() const;
  std::size_t modality_index(std::string_view name) const;  // throws ParseError
  std::size_t label_index(std::string_view name) const;     // throws ParseError

  /// SHA-256 (hex) of the canonical JSON form.
  std::string fingerprint() const;
  std::string to_json() const;
  static Manifest from_json(std::string_view text);

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

struct Subject {
  std::string id;
  std::size_t label = 0;                                  // 0-based, severity order
  std::vector<std::optional<std::vector<double>>> features;  // one slot per modality

  bool has(std::size_t modality) const { return features.at(modality).has_value(); }
  std::size_t observed_count() const;
  bool complete() const { return observed_count() == features.size(); }

  friend bool operator==(const Subject&, const Subject&) = default;
};

struct Cohort {
  Manifest manifest;
  std::vector<Subject> subjects;

  /// Checks every Cohort invariant; throws Error subclasses on violation.
  void validate() const;
  std::size_t missing_count() const;
  std::size_t observed_count(std::size_t modality) const;
  std::vector<std::size_t> complete_case_indices() const;
  std::optional<std::size_t> find(std::string_view subject_id) const;

  friend bool operator==(const Cohort&, const Cohort&) = default;
};

/// Long-format CSV: subject_id,label,modality,q_0..q_{Q-1}; one row per observed
/// (subject, modality). Subjects appear in first-seen order.
Cohort load_cohort(const std::filesystem::path& features_path, const Manifest& manifest);
Cohort load_cohort(const std::filesystem::path& features_path,
                   const std::filesystem::path& manifest_path);
Cohort parse_cohort(std::string_view csv_text, const Manifest& manifest);
std::string format_cohort(const Cohort& cohort);
void save_cohort(const Cohort& cohort, const std::filesystem::path& path);

/// Shortest round-trip decimal text for a double.
std::string format_number(double value);

inline constexpr double kStdFloor = 1e-8;

/// Per-modality per-ROI mean and sample standard deviation over the present
/// features of `train_subjects` (indices into cohort.subjects). Std is floored
/// at kStdFloor. Throws CoverageError when a modality has < 2 observations.
NormStats standardization_stats(const Cohort& cohort, std::span<const std::size_t> train_subjects);

}  // namespace ocl
