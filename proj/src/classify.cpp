#include "ocl/classify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "ocl/errors.hpp"
#include "ocl/optimizer.hpp"
#include "ocl/random.hpp"
#include "ocl/tape.hpp"

namespace ocl {

using nlohmann::json;

namespace {

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), source.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = source.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

json summary_json(const Summary& s) { return json{{"mean", s.mean}, {"std", s.stddev}}; }

}  // namespace

void ClassifierConfig::validate() const {
  if (depth == 0) throw ConfigError("classifier depth must be positive");
  if (width == 0) throw ConfigError("classifier width must be positive");
  if (epochs == 0) throw ConfigError("classifier epochs must be positive");
  if (batch_size == 0) throw ConfigError("classifier batch size must be positive");
  if (!(lr > 0.0)) throw ConfigError("classifier lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("classifier weight decay must be >= 0");
}

void MlpClassifier::fit(const Matrix& features, std::span<const std::size_t> labels,
                        std::size_t classes, const ClassifierConfig& config) {
  config.validate();
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (labels.size() != n) throw DimensionError("one label per feature row is required");
  if (n == 0) throw CoverageError("classifier needs training rows");
  for (std::size_t y : labels) {
    if (y >= classes) throw LabelError(fmt::format("label {} outside [0, {})", y, classes));
  }

  mean_.assign(d, 0.0);
  stddev_.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean_[c] += features(r, c);
  }
  for (double& m : mean_) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double e = features(r, c) - mean_[c];
      stddev_[c] += e * e;
    }
  }
  for (double& s : stddev_) {
    s = n > 1 ? std::sqrt(s / static_cast<double>(n - 1)) : 1.0;
    s = std::max(s, kStdFloor);
  }
  if (!config.standardize) {
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(stddev_.begin(), stddev_.end(), 1.0);
  }
  Matrix x(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) x(r, c) = (features(r, c) - mean_[c]) / stddev_[c];
  }

  Rng root(config.seed);
  Rng init_rng(root.fork_seed());
  Rng shuffle_rng(root.fork_seed());
  std::vector<std::size_t> widths{d};
  for (std::size_t i = 0; i + 1 < config.depth; ++i) widths.push_back(config.width);
  widths.push_back(classes);
  net_ = Mlp("classifier", widths, init_rng);

  std::vector<Parameter*> params = net_.parameters();
  AdamW optimizer({config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      std::vector<std::size_t> targets;
      targets.reserve(rows.size());
      for (std::size_t r : rows) targets.push_back(labels[r]);

      Tape tape;
      Var logits = net_.forward(tape, tape.constant(gather_rows(x, rows)));
      Var loss = softmax_cross_entropy(tape, logits, targets);
      optimizer.step(params, tape.backward(loss));
    }
  }
}

std::vector<std::size_t> MlpClassifier::predict(const Matrix& features) const {
  if (features.cols() != mean_.size()) {
    throw DimensionError(fmt::format("classifier expects {} features, got {}", mean_.size(),
                                     features.cols()));
  }
  Matrix x(features.rows(), features.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) x(r, c) = (features(r, c) - mean_[c]) / stddev_[c];
  }
  const Matrix logits = net_.apply(x);
  std::vector<std::size_t> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

Metrics classification_metrics(std::span<const std::size_t> truth,
                               std::span<const std::size_t> predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) throw DimensionError("truth and predictions differ in length");
  if (truth.empty()) throw CoverageError("metrics need at least one prediction");
  Metrics m;
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= classes || predicted[i] >= classes) throw LabelError("class id out of range");
    ++m.confusion[truth[i]][predicted[i]];
  }
  const double total = static_cast<double>(truth.size());
  std::size_t correct = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t tp = m.confusion[c][c];
    correct += tp;
    std::size_t support = 0;
    std::size_t predicted_as = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      support += m.confusion[c][j];
      predicted_as += m.confusion[j][c];
    }
    if (support == 0) continue;
    const double weight = static_cast<double>(support) / total;
    if (predicted_as > 0) {
      m.precision += weight * static_cast<double>(tp) / static_cast<double>(predicted_as);
    }
    m.recall += weight * static_cast<double>(tp) / static_cast<double>(support);
  }
  m.accuracy = static_cast<double>(correct) / total;
  return m;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  for (double v : values) s.stddev += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(s.stddev / n);
  return s;
}

std::string ClassifierReport::to_json(const Manifest& manifest) const {
  json j;
  j["depth"] = depth;
  j["imputation"] = imputation;
  j["labels"] = manifest.labels;
  json folds_json = json::array();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    folds_json.push_back(json{{"fold", f},
                              {"train_size", fold.train_size},
                              {"test_size", fold.test_size},
                              {"accuracy", fold.metrics.accuracy},
                              {"precision", fold.metrics.precision},
                              {"recall", fold.metrics.recall},
                              {"confusion", fold.metrics.confusion}});
  }
  j["folds"] = std::move(folds_json);
  j["accuracy"] = summary_json(accuracy);
  j["precision"] = summary_json(precision);
  j["recall"] = summary_json(recall);
  return j.dump(2) + "\n";
}

std::vector<double> concatenated_features(const Subject& subject) {
  std::vector<double> out;
  for (std::size_t t = 0; t < subject.features.size(); ++t) {
    if (!subject.features[t]) {
      throw CoverageError(fmt::format("subject '{}' is missing modality {}", subject.id, t));
    }
    out.insert(out.end(), subject.features[t]->begin(), subject.features[t]->end());
  }
  return out;
}

ClassifierReport downstream_classify(const Cohort& cohort, const SplitPlan& plan,
                                     const ImputedCohort* imputed,
                                     const ClassifierConfig& config) {
  config.validate();
  if (config.depth != 2 && config.depth != 4) throw ConfigError("classifier depth must be 2 or 4");
  const std::size_t width = cohort.manifest.num_modalities() * cohort.manifest.num_rois;
  const std::size_t classes = cohort.manifest.num_labels();

  // Train-only rows from the imputer, shared by every fold.
  std::vector<std::vector<double>> extra_rows;
  std::vector<std::size_t> extra_labels;
  if (imputed != nullptr) {
    if (imputed->cohort.manifest != cohort.manifest) {
      throw FingerprintError("imputed cohort was produced for a different manifest");
    }
    for (const auto& id : plan.train_only) {
      const auto k = imputed->cohort.find(id);
      if (!k) throw CoverageError(fmt::format("imputed cohort has no subject '{}'", id));
      extra_rows.push_back(concatenated_features(imputed->cohort.subjects[*k]));
      extra_labels.push_back(imputed->cohort.subjects[*k].label);
    }
  }

  ClassifierReport report;
  report.depth = config.depth;
  report.imputation = imputed != nullptr;
  Rng fold_seeds(config.seed);
  std::vector<double> accuracy;
  std::vector<double> precision;
  std::vector<double> recall;
  for (std::size_t f = 0; f < plan.fold_count(); ++f) {
    const auto test = plan.test_indices(cohort, f);
    for (std::size_t k : test) {
      const Subject& s = cohort.subjects[k];
      if (!s.complete()) {
        throw LeakageError(fmt::format("test subject '{}' is not a complete case", s.id));
      }
      if (imputed != nullptr) {
        const auto j = imputed->cohort.find(s.id);
        if (j) {
          for (std::size_t t = 0; t < cohort.manifest.num_modalities(); ++t) {
            if (!imputed->observed(*j, t)) {
              throw LeakageError(fmt::format(
                  "test subject '{}' has an imputed '{}' entry", s.id, cohort.manifest.modalities[t]));
            }
          }
        }
      }
    }
    const auto train = plan.complete_train_indices(cohort, f);

    Matrix x_train(train.size() + extra_rows.size(), width);
    std::vector<std::size_t> y_train;
    std::size_t row = 0;
    for (std::size_t k : train) {
      const auto v = concatenated_features(cohort.subjects[k]);
      std::copy(v.begin(), v.end(), x_train.row(row++).begin());
      y_train.push_back(cohort.subjects[k].label);
    }
    for (std::size_t i = 0; i < extra_rows.size(); ++i) {
      std::copy(extra_rows[i].begin(), extra_rows[i].end(), x_train.row(row++).begin());
      y_train.push_back(extra_labels[i]);
    }
    Matrix x_test(test.size(), width);
    std::vector<std::size_t> y_test;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto v = concatenated_features(cohort.subjects[test[i]]);
      std::copy(v.begin(), v.end(), x_test.row(i).begin());
      y_test.push_back(cohort.subjects[test[i]].label);
    }

    ClassifierConfig fold_config = config;
    fold_config.seed = fold_seeds.fork_seed();
    MlpClassifier classifier;
    classifier.fit(x_train, y_train, classes, fold_config);
    FoldReport fold;
    fold.metrics = classification_metrics(y_test, classifier.predict(x_test), classes);
    fold.train_size = y_train.size();
    fold.test_size = y_test.size();
    accuracy.push_back(fold.metrics.accuracy);
    precision.push_back(fold.metrics.precision);
    recall.push_back(fold.metrics.recall);
    report.folds.push_back(std::move(fold));
  }
  report.accuracy = summarize(accuracy);
  report.precision = summarize(precision);
  report.recall = summarize(recall);
  return report;
}

double modality_probe_accuracy(const Matrix& embeddings, std::span<const std::size_t> modality,
                               std::size_t modalities, const ClassifierConfig& config,
                               double train_fraction) {
  const std::size_t n = embeddings.rows();
  if (modality.size() != n) throw DimensionError("one modality id per embedding is required");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("probe train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);
  rng.shuffle(order);
  const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  if (cut == 0 || cut == n) throw CoverageError("probe needs both training and held-out rows");
  const std::span<const std::size_t> train_rows(order.data(), cut);
  const std::span<const std::size_t> test_rows(order.data() + cut, n - cut);

  std::vector<std::size_t> y_train;
  for (std::size_t r : train_rows) y_train.push_back(modality[r]);
  std::vector<std::size_t> y_test;
  for (std::size_t r : test_rows) y_test.push_back(modality[r]);

  ClassifierConfig probe_config = config;
  probe_config.seed = rng.fork_seed();
  MlpClassifier probe;
  probe.fit(gather_rows(embeddings, train_rows), y_train, modalities, probe_config);
  return classification_metrics(y_test, probe.predict(gather_rows(embeddings, test_rows)),
                                modalities)
      .accuracy;
}

}  // namespace ocl
