#include "ocl/commands.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <omp.h>

#include <chrono>
#include <ctime>
#include <functional>
#include <map>

#include "CLI11.hpp"
#include "ocl/checkpoint.hpp"
#include "ocl/classify.hpp"
#include "ocl/embeddings.hpp"
#include "ocl/errors.hpp"
#include "ocl/imputation.hpp"
#include "ocl/io.hpp"
#include "ocl/kernels.hpp"
#include "ocl/splits.hpp"
#include "ocl/stats.hpp"
#include "ocl/synthetic.hpp"
#include "ocl/training.hpp"

namespace ocl {

namespace fs = std::filesystem;

namespace {

struct Context {
  RunConfig config;
  fs::path dir;
  std::ostream& log;

  fs::path path(const std::string& configured, const char* default_name) const {
    return configured.empty() ? dir / default_name : fs::path(configured);
  }
  fs::path features() const { return path(config.paths.features, "features.csv"); }
  fs::path manifest() const { return path(config.paths.manifest, "manifest.json"); }
  fs::path ground_truth() const { return path(config.paths.ground_truth, "ground_truth.csv"); }
  fs::path checkpoint() const { return path(config.paths.checkpoint, "checkpoint.json"); }
  fs::path imputed() const { return path(config.paths.imputed, "imputed.csv"); }
  fs::path provenance() const { return path(config.paths.provenance, "provenance.csv"); }
  fs::path output(const char* name) const { return dir / name; }

  void wrote(const fs::path& p) const { fmt::print(log, "wrote {}\n", p.string()); }
};

void require(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifactError(fmt::format("missing artifact: {}", p.string()));
}

Cohort load_observed(const Context& ctx) {
  require(ctx.manifest());
  require(ctx.features());
  Cohort cohort = load_cohort(ctx.features(), ctx.manifest());
  cohort.validate();
  return cohort;
}

void cmd_generate(const Context& ctx) {
  const SyntheticSpec spec = ctx.config.resolved_synthetic();
  const SyntheticCohort data = generate_synthetic(spec);
  save_manifest(data.observed.manifest, ctx.manifest());
  ctx.wrote(ctx.manifest());
  save_cohort(data.observed, ctx.features());
  ctx.wrote(ctx.features());
  save_cohort(data.ground_truth, ctx.ground_truth());
  ctx.wrote(ctx.ground_truth());
  fmt::print(ctx.log, "{} subjects, {} missing (subject, modality) entries\n",
             data.observed.subjects.size(), data.observed.missing_count());
}

void cmd_train(const Context& ctx) {
  const Cohort cohort = load_observed(ctx);
  const auto subjects = training_subjects(cohort, ctx.config.exclude_complete_cases);
  const TrainConfig train = ctx.config.resolved_train();
  fmt::print(ctx.log, "training on {} subjects for {} epochs ({})\n", subjects.size(), train.epochs,
             to_string(train.loss_mode));
  const TrainedModels models = train_models(cohort, subjects, train);
  save_checkpoint(models.checkpoint, cohort.manifest, ctx.checkpoint());
  ctx.wrote(ctx.checkpoint());
  write_file(ctx.output("train_log_encoder.csv"), models.encoder_log.to_csv(false));
  ctx.wrote(ctx.output("train_log_encoder.csv"));
  write_file(ctx.output("train_log_decoder.csv"), models.decoder_log.to_csv(true));
  ctx.wrote(ctx.output("train_log_decoder.csv"));
}

void cmd_impute(const Context& ctx) {
  const Cohort cohort = load_observed(ctx);
  require(ctx.checkpoint());
  const Checkpoint checkpoint = load_checkpoint(ctx.checkpoint(), cohort.manifest);
  const ImputedCohort imputed = impute(cohort, checkpoint);
  save_imputed(imputed, ctx.imputed(), ctx.provenance());
  ctx.wrote(ctx.imputed());
  ctx.wrote(ctx.provenance());
}

ImputedCohort load_imputed_for(const Context& ctx, const Cohort& cohort) {
  require(ctx.imputed());
  require(ctx.provenance());
  ImputedCohort imputed = load_imputed(ctx.imputed(), ctx.provenance(), cohort.manifest);
  imputed.cohort.validate();
  return imputed;
}

void cmd_eval_stats(const Context& ctx) {
  const Cohort cohort = load_observed(ctx);
  const double alpha = ctx.config.eval.alpha;
  const auto before = adjacent_comparisons(cohort, alpha);
  write_file(ctx.output("stats_before.csv"), stat_results_csv(before, cohort.manifest));
  ctx.wrote(ctx.output("stats_before.csv"));
  if (!ctx.config.eval.imputation) return;

  const ImputedCohort imputed = load_imputed_for(ctx, cohort);
  const auto after = adjacent_comparisons(imputed.cohort, alpha);
  write_file(ctx.output("stats_after.csv"), stat_results_csv(after, cohort.manifest));
  ctx.wrote(ctx.output("stats_after.csv"));

  std::string summary = "modality,comparison,before,after,common\n";
  for (std::size_t i = 0; i < before.size(); ++i) {
    const auto& m = cohort.manifest;
    summary += fmt::format("{},{}-{},{},{},{}\n", m.modalities[before[i].modality],
                           m.labels[before[i].label_a], m.labels[before[i].label_b],
                           before[i].n_significant(), after[i].n_significant(),
                           common_significant(before[i], after[i]));
  }
  write_file(ctx.output("stats_summary.csv"), summary);
  ctx.wrote(ctx.output("stats_summary.csv"));
}

void cmd_eval_classify(const Context& ctx) {
  const Cohort cohort = load_observed(ctx);
  const SplitPlan plan = make_splits(cohort, ctx.config.eval.folds, ctx.config.seed);
  std::optional<ImputedCohort> imputed;
  if (ctx.config.eval.imputation) imputed = load_imputed_for(ctx, cohort);
  const ClassifierReport report = downstream_classify(
      cohort, plan, imputed ? &*imputed : nullptr, ctx.config.classifier());
  write_file(ctx.output("classify_report.json"), report.to_json(cohort.manifest));
  ctx.wrote(ctx.output("classify_report.json"));
  fmt::print(ctx.log, "accuracy {:.3f} +- {:.3f} over {} folds (depth {}, {})\n",
             report.accuracy.mean, report.accuracy.stddev, report.folds.size(), report.depth,
             report.imputation ? "with imputation" : "no imputation");
}

void cmd_export_embeddings(const Context& ctx) {
  const Cohort cohort = load_observed(ctx);
  require(ctx.checkpoint());
  const Checkpoint checkpoint = load_checkpoint(ctx.checkpoint(), cohort.manifest);
  export_embeddings(cohort, checkpoint.encoder, ctx.output("embeddings.csv"));
  ctx.wrote(ctx.output("embeddings.csv"));
}

const std::map<std::string, std::function<void(const Context&)>>& commands() {
  static const std::map<std::string, std::function<void(const Context&)>> table{
      {"generate", cmd_generate},
      {"train", cmd_train},
      {"impute", cmd_impute},
      {"eval-stats", cmd_eval_stats},
      {"eval-classify", cmd_eval_classify},
      {"export-embeddings", cmd_export_embeddings},
  };
  return table;
}

}  // namespace

RunConfig resolve_config(const Overrides& o) {
  RunConfig config;
  if (o.config_path) {
    if (!fs::exists(*o.config_path)) {
      throw ConfigError(fmt::format("config file not found: {}", *o.config_path));
    }
    config = load_run_config(*o.config_path);
  }
  if (o.seed) config.seed = *o.seed;
  if (o.threads) config.threads = *o.threads;
  if (o.alpha) config.eval.alpha = *o.alpha;
  if (o.folds) config.eval.folds = *o.folds;
  if (o.depth) config.eval.depth = *o.depth;
  if (o.loss_mode) config.train.loss_mode = loss_mode_from_string(*o.loss_mode);
  if (o.no_mc) config.train.use_mc = false;
  if (o.no_imputation) config.eval.imputation = false;
  config.validate();
  return config;
}

fs::path run_directory(const std::string& command, const RunConfig& config,
                       const Overrides& overrides) {
  if (overrides.out) return fs::path(*overrides.out);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fs::path(config.paths.runs_root) /
         fmt::format("{}-{}-{:%Y%m%dT%H%M%SZ}", command, config.hash(), fmt::gmtime(now));
}

int run_command(const std::string& command, const Overrides& overrides, std::ostream& log,
                std::ostream& err) {
  try {
    const auto it = commands().find(command);
    if (it == commands().end()) throw ConfigError(fmt::format("unknown command '{}'", command));
    const RunConfig config = resolve_config(overrides);
    if (config.threads > 0) {
      kernels::set_thread_count(config.threads);
      omp_set_num_threads(config.threads);
    }
    Context ctx{config, run_directory(command, config, overrides), log};
    fs::create_directories(ctx.dir);
    write_file(ctx.output("effective_config.json"), config.to_json());
    it->second(ctx);
    return kExitOk;
  } catch (const ConfigError& e) {
    fmt::print(err, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const MissingArtifactError& e) {
    fmt::print(err, "missing artifact: {}\n", e.what());
    return kExitMissingArtifact;
  } catch (const FingerprintError& e) {
    fmt::print(err, "fingerprint mismatch: {}\n", e.what());
    return kExitFingerprint;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitInternal;
  }
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Ordinal contrastive imputation of multi-modal imaging features"};
  app.require_subcommand(1);

  Overrides o;
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  double alpha = 0.0;
  std::size_t folds = 0;
  std::size_t depth = 0;
  std::string loss_mode;

  std::map<std::string, std::string> help{
      {"generate", "Write a synthetic cohort (features, ground truth, manifest)"},
      {"train", "Train encoder, domain classifier and decoder; write a checkpoint"},
      {"impute", "Fill every missing modality from a checkpoint"},
      {"eval-stats", "Per-ROI group comparisons before and after imputation"},
      {"eval-classify", "k-fold diagnosis classification with or without imputation"},
      {"export-embeddings", "Write the embedding of every observed record"},
  };
  std::vector<std::pair<CLI::App*, std::vector<CLI::Option*>>> subs;
  for (const auto& [name, description] : help) {
    CLI::App* sub = app.add_subcommand(name, description);
    std::vector<CLI::Option*> opts;
    opts.push_back(sub->add_option("--config", config_path, "JSON run configuration"));
    opts.push_back(sub->add_option("--seed", seed, "Seed for every random stream"));
    opts.push_back(sub->add_option("--out", out, "Output directory"));
    opts.push_back(sub->add_option("--threads", threads, "Upper bound on worker threads"));
    opts.push_back(sub->add_option("--alpha", alpha, "Family-wise significance level"));
    opts.push_back(sub->add_option("--folds", folds, "Cross-validation folds"));
    opts.push_back(sub->add_option("--depth", depth, "Classifier depth (2 or 4)"));
    opts.push_back(sub->add_option("--loss-mode", loss_mode, "ocl or scl"));
    opts.push_back(sub->add_flag("--no-mc", o.no_mc, "Disable the modality coherence loss"));
    opts.push_back(
        sub->add_flag("--no-imputation", o.no_imputation, "Evaluate without imputed subjects"));
    subs.emplace_back(sub, std::move(opts));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (const auto& [sub, opts] : subs) {
    if (!sub->parsed()) continue;
    if (opts[0]->count()) o.config_path = config_path;
    if (opts[1]->count()) o.seed = seed;
    if (opts[2]->count()) o.out = out;
    if (opts[3]->count()) o.threads = threads;
    if (opts[4]->count()) o.alpha = alpha;
    if (opts[5]->count()) o.folds = folds;
    if (opts[6]->count()) o.depth = depth;
    if (opts[7]->count()) o.loss_mode = loss_mode;
    return run_command(sub->get_name(), o, std::cout, std::cerr);
  }
  return kExitConfig;
}

}  // namespace ocl
