#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ocl/cohort.hpp"
#include "ocl/model.hpp"

namespace ocl {

inline constexpr int kCheckpointVersion = 1;

struct Hyperparameters {
  double tau = 0.1;
  std::size_t hidden_width = 128;
  std::size_t embedding_dim = 128;
  std::uint64_t seed = 0;
  std::string loss_mode = "ocl";
  bool use_mc = true;
  double lambda_rev = 1.0;

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// Everything needed to impute on a cohort with the same manifest.
struct Checkpoint {
  std::string manifest_sha;
  Hyperparameters hparams;
  Encoder encoder;  // carries the normalization statistics
  Decoder decoder;
  DomainClassifier classifier;
};

std::string checkpoint_to_json(const Checkpoint& checkpoint, const Manifest& manifest);
/// Throws ParseError (malformed), VersionError, or FingerprintError when the
/// stored manifest fingerprint differs from `manifest`.
Checkpoint checkpoint_from_json(std::string_view text, const Manifest& manifest);

/// Writes to a temporary sibling file and renames it into place.
void save_checkpoint(const Checkpoint& checkpoint, const Manifest& manifest,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const Manifest& manifest);

}  // namespace ocl
