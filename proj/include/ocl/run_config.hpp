#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "ocl/classify.hpp"
#include "ocl/synthetic.hpp"
#include "ocl/training.hpp"

namespace ocl {

/// Artifact locations. An empty path means "<run dir>/<default file name>".
struct PathsConfig {
  std::string features;      // features.csv
  std::string manifest;      // manifest.json
  std::string ground_truth;  // ground_truth.csv
  std::string checkpoint;    // checkpoint.json
  std::string imputed;       // imputed.csv
  std::string provenance;    // provenance.csv
  std::string runs_root = "runs";  // parent of generated run directories
};

struct EvalConfig {
  double alpha = 0.01;
  std::size_t folds = 5;
  std::size_t depth = 2;
  bool imputation = true;
  std::size_t classifier_width = 128;
  std::size_t classifier_epochs = 100;
  std::size_t classifier_batch_size = 64;
  double classifier_lr = 1e-3;
  double classifier_weight_decay = 0.05;
};

/// Everything one CLI invocation depends on. The single `seed` drives data
/// generation, training, fold assignment and classifier initialization.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = OpenMP default
  PathsConfig paths;
  TrainConfig train;
  /// Train the imputer on subjects with at least one missing modality only, so
  /// that complete cases (the only test-fold candidates) never shape it.
  bool exclude_complete_cases = true;
  SyntheticSpec synthetic;
  EvalConfig eval;

  /// Throws ConfigError on invalid values.
  void validate() const;
  /// Copies `seed` into the sections that carry their own seed field.
  TrainConfig resolved_train() const;
  SyntheticSpec resolved_synthetic() const;
  ClassifierConfig classifier() const;

  /// Every field, defaults included, as pretty-printed JSON.
  std::string to_json() const;
  /// Missing keys keep their defaults; unknown keys raise ConfigError.
  static RunConfig from_json(std::string_view text);
  /// First 12 hex digits of the SHA-256 of to_json().
  std::string hash() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ocl
