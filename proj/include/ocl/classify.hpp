#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ocl/cohort.hpp"
#include "ocl/imputation.hpp"
#include "ocl/matrix.hpp"
#include "ocl/model.hpp"
#include "ocl/splits.hpp"

namespace ocl {

struct ClassifierConfig {
  std::size_t depth = 2;  // affine layers; downstream evaluation uses 2 or 4
  std::size_t width = 128;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 0.05;
  std::uint64_t seed = 0;
  bool standardize = true;  // z-score inputs with training-row statistics

  void validate() const;  // throws ConfigError
};

/// Feed-forward softmax classifier on standardized inputs. Standardization
/// statistics are fitted on the training rows only.
class MlpClassifier {
 public:
  void fit(const Matrix& features, std::span<const std::size_t> labels, std::size_t classes,
           const ClassifierConfig& config);
  std::vector<std::size_t> predict(const Matrix& features) const;

 private:
  std::vector<double> mean_;
  std::vector<double> stddev_;
  Mlp net_;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;  // weighted by true-class support
  double recall = 0.0;     // weighted by true-class support; equals accuracy
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

Metrics classification_metrics(std::span<const std::size_t> truth,
                               std::span<const std::size_t> predicted, std::size_t classes);

struct FoldReport {
  Metrics metrics;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation over folds
};

Summary summarize(std::span<const double> values);

struct ClassifierReport {
  std::size_t depth = 2;
  bool imputation = false;
  std::vector<FoldReport> folds;
  Summary accuracy;
  Summary precision;
  Summary recall;

  std::string to_json(const Manifest& manifest) const;
};

/// Subject features of every modality concatenated in manifest order (S * Q).
std::vector<double> concatenated_features(const Subject& subject);

/// k-fold evaluation over `plan`. Test folds use the observed features of
/// complete-case subjects; training uses the remaining complete cases plus,
/// when `imputed` is given, every train-only subject filled in by the imputer.
/// Throws LeakageError if a test subject is incomplete in `cohort` or carries
/// an imputed entry in `imputed`.
ClassifierReport downstream_classify(const Cohort& cohort, const SplitPlan& plan,
                                     const ImputedCohort* imputed,
                                     const ClassifierConfig& config);

/// Accuracy of a fresh classifier predicting the modality of each embedding,
/// trained on a seeded `train_fraction` of the rows and scored on the rest.
double modality_probe_accuracy(const Matrix& embeddings, std::span<const std::size_t> modality,
                               std::size_t modalities, const ClassifierConfig& config,
                               double train_fraction = 0.8);

}  // namespace ocl
