#include "ocl/run_config.hpp"

#include <fmt/format.h>

#include <initializer_list>

#include "json.hpp"
#include "ocl/errors.hpp"
#include "ocl/io.hpp"

namespace ocl {

using nlohmann::json;

namespace {

void reject_unknown(const json& section, std::string_view where,
                    std::initializer_list<std::string_view> allowed) {
  if (!section.is_object()) throw ConfigError(fmt::format("'{}' must be an object", where));
  for (const auto& [key, value] : section.items()) {
    bool known = false;
    for (auto name : allowed) known = known || key == name;
    if (!known) throw ConfigError(fmt::format("unknown config key '{}{}'", where, key));
  }
}

template <typename T>
void read(const json& section, const char* key, T& field) {
  if (section.contains(key)) field = section.at(key).get<T>();
}

json retention_json(const SyntheticSpec& spec) {
  if (spec.retention.empty()) return nullptr;
  return spec.retention;
}

std::vector<std::vector<double>> retention_from(const json& j, const SyntheticSpec& spec) {
  if (j.is_null()) return {};
  if (j.is_number()) {
    return std::vector<std::vector<double>>(spec.modalities,
                                            std::vector<double>(spec.labels, j.get<double>()));
  }
  if (j.is_string()) {
    if (j.get<std::string>() == "adni_like") return adni_like_retention();
    throw ConfigError(fmt::format("unknown retention preset '{}'", j.get<std::string>()));
  }
  return j.get<std::vector<std::vector<double>>>();
}

}  // namespace

void RunConfig::validate() const {
  if (threads < 0) throw ConfigError("threads must be >= 0");
  resolved_train().validate();
  resolved_synthetic().validate();
  classifier().validate();
  if (!(eval.alpha > 0.0 && eval.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (eval.folds < 2) throw ConfigError("folds must be >= 2");
}

TrainConfig RunConfig::resolved_train() const {
  TrainConfig out = train;
  out.seed = seed;
  return out;
}

SyntheticSpec RunConfig::resolved_synthetic() const {
  SyntheticSpec out = synthetic;
  out.seed = seed;
  return out;
}

ClassifierConfig RunConfig::classifier() const {
  ClassifierConfig out;
  out.depth = eval.depth;
  out.width = eval.classifier_width;
  out.epochs = eval.classifier_epochs;
  out.batch_size = eval.classifier_batch_size;
  out.lr = eval.classifier_lr;
  out.weight_decay = eval.classifier_weight_decay;
  out.seed = seed;
  return out;
}

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["exclude_complete_cases"] = exclude_complete_cases;
  j["paths"] = json{{"features", paths.features},         {"manifest", paths.manifest},
                    {"ground_truth", paths.ground_truth}, {"checkpoint", paths.checkpoint},
                    {"imputed", paths.imputed},           {"provenance", paths.provenance},
                    {"runs_root", paths.runs_root}};
  j["train"] = json{{"epochs", train.epochs},
                    {"batch_size", train.batch_size},
                    {"lr", train.lr},
                    {"weight_decay", train.weight_decay},
                    {"tau", train.tau},
                    {"lambda_rev", train.lambda_rev},
                    {"loss_mode", to_string(train.loss_mode)},
                    {"use_mc", train.use_mc},
                    {"log_every", train.log_every},
                    {"hidden_width", train.hidden_width},
                    {"embedding_dim", train.embedding_dim}};
  j["synthetic"] = json{{"subjects", synthetic.subjects},
                        {"rois", synthetic.rois},
                        {"modalities", synthetic.modalities},
                        {"labels", synthetic.labels},
                        {"latent_dim", synthetic.latent_dim},
                        {"noise_std", synthetic.noise_std},
                        {"progression_loading", synthetic.progression_loading},
                        {"retention", retention_json(synthetic)}};
  j["eval"] = json{{"alpha", eval.alpha},
                   {"folds", eval.folds},
                   {"depth", eval.depth},
                   {"imputation", eval.imputation},
                   {"classifier_width", eval.classifier_width},
                   {"classifier_epochs", eval.classifier_epochs},
                   {"classifier_batch_size", eval.classifier_batch_size},
                   {"classifier_lr", eval.classifier_lr},
                   {"classifier_weight_decay", eval.classifier_weight_decay}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  RunConfig c;
  try {
    reject_unknown(j, "",
                   {"seed", "threads", "exclude_complete_cases", "paths", "train", "synthetic",
                    "eval"});
    read(j, "seed", c.seed);
    read(j, "threads", c.threads);
    read(j, "exclude_complete_cases", c.exclude_complete_cases);
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      reject_unknown(p, "paths.",
                     {"features", "manifest", "ground_truth", "checkpoint", "imputed",
                      "provenance", "runs_root"});
      read(p, "features", c.paths.features);
      read(p, "manifest", c.paths.manifest);
      read(p, "ground_truth", c.paths.ground_truth);
      read(p, "checkpoint", c.paths.checkpoint);
      read(p, "imputed", c.paths.imputed);
      read(p, "provenance", c.paths.provenance);
      read(p, "runs_root", c.paths.runs_root);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      reject_unknown(t, "train.",
                     {"epochs", "batch_size", "lr", "weight_decay", "tau", "lambda_rev",
                      "loss_mode", "use_mc", "log_every", "hidden_width", "embedding_dim"});
      read(t, "epochs", c.train.epochs);
      read(t, "batch_size", c.train.batch_size);
      read(t, "lr", c.train.lr);
      read(t, "weight_decay", c.train.weight_decay);
      read(t, "tau", c.train.tau);
      read(t, "lambda_rev", c.train.lambda_rev);
      if (t.contains("loss_mode")) {
        c.train.loss_mode = loss_mode_from_string(t.at("loss_mode").get<std::string>());
      }
      read(t, "use_mc", c.train.use_mc);
      read(t, "log_every", c.train.log_every);
      read(t, "hidden_width", c.train.hidden_width);
      read(t, "embedding_dim", c.train.embedding_dim);
    }
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      reject_unknown(s, "synthetic.",
                     {"subjects", "rois", "modalities", "labels", "latent_dim", "noise_std",
                      "progression_loading", "retention"});
      read(s, "subjects", c.synthetic.subjects);
      read(s, "rois", c.synthetic.rois);
      read(s, "modalities", c.synthetic.modalities);
      read(s, "labels", c.synthetic.labels);
      read(s, "latent_dim", c.synthetic.latent_dim);
      read(s, "noise_std", c.synthetic.noise_std);
      read(s, "progression_loading", c.synthetic.progression_loading);
      if (s.contains("retention")) c.synthetic.retention = retention_from(s.at("retention"), c.synthetic);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      reject_unknown(e, "eval.",
                     {"alpha", "folds", "depth", "imputation", "classifier_width",
                      "classifier_epochs", "classifier_batch_size", "classifier_lr",
                      "classifier_weight_decay"});
      read(e, "alpha", c.eval.alpha);
      read(e, "folds", c.eval.folds);
      read(e, "depth", c.eval.depth);
      read(e, "imputation", c.eval.imputation);
      read(e, "classifier_width", c.eval.classifier_width);
      read(e, "classifier_epochs", c.eval.classifier_epochs);
      read(e, "classifier_batch_size", c.eval.classifier_batch_size);
      read(e, "classifier_lr", c.eval.classifier_lr);
      read(e, "classifier_weight_decay", c.eval.classifier_weight_decay);
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("invalid config value: {}", e.what()));
  }
  return c;
}

std::string RunConfig::hash() const { return sha256_hex(to_json()).substr(0, 12); }

RunConfig load_run_config(const std::filesystem::path& path) {
  return RunConfig::from_json(read_file(path));
}

}  // namespace ocl
