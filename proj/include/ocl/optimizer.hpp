#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "ocl/matrix.hpp"
#include "ocl/tape.hpp"

namespace ocl {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

/// Adam with decoupled weight decay. Decay is applied only to parameters
/// flagged `decay` (weight matrices), before the bias-corrected adaptive step.
class AdamW {
 public:
  explicit AdamW(AdamWOptions options = {}) : options_(options) {}

  /// Updates every parameter in `params` from `grads`. A parameter without a
  /// gradient entry is treated as having zero gradient. Throws NumericError if
  /// a gradient is non-finite and DimensionError on shape disagreement.
  void step(std::span<Parameter* const> params, const GradientMap& grads);

  const AdamWOptions& options() const { return options_; }
  std::uint64_t step_count() const { return step_count_; }
  const Matrix& first_moment(const std::string& name) const { return first_.at(name); }
  const Matrix& second_moment(const std::string& name) const { return second_.at(name); }

 private:
  AdamWOptions options_;
  std::uint64_t step_count_ = 0;
  std::map<std::string, Matrix> first_;
  std::map<std::string, Matrix> second_;
};

}  // namespace ocl
