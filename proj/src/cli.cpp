#include "clover/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include <CLI11.hpp>

#include "clover/config.hpp"
#include "clover/json_format.hpp"
#include "clover/pipeline.hpp"

namespace clover {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A flag that overrides one config setting.
struct SettingFlag {
  std::string key;
  std::string value;
  CLI::Option* option = nullptr;
};

struct CommonOptions {
  std::string config_path;
  std::string seed;
  std::vector<std::string> sets;
  std::vector<std::unique_ptr<SettingFlag>> flags;
  CLI::Option* seed_option = nullptr;
};

struct FlagSpec {
  const char* flag;
  const char* key;
};

void add_common(CLI::App* app, CommonOptions& common, const std::vector<FlagSpec>& flags) {
  app->add_option("--config", common.config_path, "configuration file");
  common.seed_option = app->add_option("--seed", common.seed, "root random seed (fallback: CLOVER_SEED)");
  app->add_option("--set", common.sets, "override a setting: section.key=value (repeatable)");
  for (const FlagSpec& spec : flags) {
    auto flag = std::make_unique<SettingFlag>();
    flag->key = spec.key;
    std::string help = "sets " + std::string(spec.key);
    for (const SettingInfo& info : setting_catalog()) {
      if (info.key == spec.key) help = info.help + " [" + spec.key + "]";
    }
    flag->option = app->add_option(spec.flag, flag->value, help);
    common.flags.push_back(std::move(flag));
  }
}

// Default < config file < CLOVER_SEED < --set < dedicated flags and --seed.
PipelineConfig resolve_config(const CommonOptions& common, std::vector<Variant>* variants = nullptr) {
  PipelineConfig cfg;
  try {
    if (!common.config_path.empty()) {
      const ConfigFile file = load_config(common.config_path);
      apply_config(cfg, file);
      if (variants) *variants = file.variants;
    }
    if (const char* env = std::getenv("CLOVER_SEED"); env && *env && common.seed_option->count() == 0) {
      apply_setting(cfg, "run.seed", env);
    }
    for (const std::string& set : common.sets) {
      for (const auto& [key, value] : parse_assignments(set)) apply_setting(cfg, key, value);
    }
    for (const auto& flag : common.flags) {
      if (flag->option->count() > 0) apply_setting(cfg, flag->key, flag->value);
    }
    if (common.seed_option->count() > 0) apply_setting(cfg, "run.seed", common.seed);
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::uint64_t campaign_seed(const PipelineConfig& cfg) { return Rng(cfg.seed).derive(kPoolStream).seed(); }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robustness fuzzing of small classifiers guided by contextual confidence", "clover"};
  app.require_subcommand(1);

  const std::initializer_list<FlagSpec> data_flags = {{"--dataset-kind", "data.kind"},
                                                      {"--classes", "data.num_classes"},
                                                      {"--dim", "data.dim"},
                                                      {"--samples-per-class", "data.samples_per_class"},
                                                      {"--spread", "data.spread"},
                                                      {"--dataset", "data.csv"},
                                                      {"--normalization", "data.normalization"}};
  const std::initializer_list<FlagSpec> fuzz_flags = {{"--epsilon", "fuzz.epsilon"},
                                                      {"--delta", "fuzz.delta"},
                                                      {"--k", "fuzz.k"},
                                                      {"--m", "fuzz.m"},
                                                      {"--max-lr", "fuzz.max_lr"},
                                                      {"--p-norm", "fuzz.p_norm"},
                                                      {"--budget-attempts", "fuzz.budget_attempts"},
                                                      {"--budget-seconds", "fuzz.budget_seconds"},
                                                      {"--guiding-metric", "fuzz.guiding_metric"},
                                                      {"--select-order", "fuzz.select_order"},
                                                      {"--seed-equivalence", "fuzz.use_seed_equivalence"},
                                                      {"--eq-update", "fuzz.eq_update"}};

  // train
  CommonOptions train_common;
  std::string train_out = "model.json";
  std::string train_splits;
  auto* train_cmd = app.add_subcommand("train", "train a model on the configured dataset");
  add_common(train_cmd, train_common,
             {{"--dataset-kind", "data.kind"},
              {"--classes", "data.num_classes"},
              {"--dim", "data.dim"},
              {"--samples-per-class", "data.samples_per_class"},
              {"--spread", "data.spread"},
              {"--dataset", "data.csv"},
              {"--normalization", "data.normalization"},
              {"--hidden", "model.hidden"},
              {"--epochs", "train.epochs"},
              {"--lr", "train.lr"}});
  train_cmd->add_option("--out", train_out, "model file to write");
  train_cmd->add_option("--save-splits", train_splits, "directory for train/val/test CSV files");

  // fuzz
  CommonOptions fuzz_common;
  std::string fuzz_model, fuzz_data, fuzz_out = "pool.jsonl", fuzz_log;
  auto* fuzz_cmd = app.add_subcommand("fuzz", "run a fuzzing campaign over a seed list");
  add_common(fuzz_cmd, fuzz_common, fuzz_flags);
  fuzz_cmd->add_option("--model", fuzz_model, "model file")->required();
  fuzz_cmd->add_option("--data", fuzz_data, "seed CSV")->required();
  fuzz_cmd->add_option("--out", fuzz_out, "pool file to write");
  fuzz_cmd->add_option("--log", fuzz_log, "campaign log to write");

  // select
  CommonOptions select_common;
  std::string select_pool, select_model, select_out = "suite.jsonl";
  auto* select_cmd = app.add_subcommand("select", "build a test suite from a pool");
  add_common(select_cmd, select_common,
             {{"--selector", "select.selector"},
              {"--n", "select.n"},
              {"--km-sections", "select.km_sections"},
              {"--select-order", "fuzz.select_order"},
              {"--epsilon", "fuzz.epsilon"}});
  select_cmd->add_option("--pool", select_pool, "pool file")->required();
  select_cmd->add_option("--model", select_model, "model file (needed by gini, be_st, km_st and missing cc values)");
  select_cmd->add_option("--out", select_out, "suite file to write");

  // retrain
  CommonOptions retrain_common;
  std::string retrain_model, retrain_suite, retrain_data, retrain_out = "model_after.json";
  auto* retrain_cmd = app.add_subcommand("retrain", "finetune a model on training data plus a suite");
  add_common(retrain_cmd, retrain_common,
             {{"--epochs", "retrain.epochs"}, {"--lr", "retrain.lr"}, {"--normalization", "data.normalization"}});
  retrain_cmd->add_option("--model", retrain_model, "model file")->required();
  retrain_cmd->add_option("--suite", retrain_suite, "suite file")->required();
  retrain_cmd->add_option("--data", retrain_data, "training CSV")->required();
  retrain_cmd->add_option("--out", retrain_out, "model file to write");

  // eval
  CommonOptions eval_common;
  std::string eval_model, eval_universe, eval_data;
  auto* eval_cmd = app.add_subcommand("eval", "report robust accuracy and test accuracy");
  add_common(eval_cmd, eval_common, {{"--normalization", "data.normalization"}});
  eval_cmd->add_option("--model", eval_model, "model file")->required();
  eval_cmd->add_option("--universe", eval_universe, "assessment universe file");
  eval_cmd->add_option("--data", eval_data, "labelled test CSV");

  // pipeline
  CommonOptions pipeline_common;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "generate, select, retrain and evaluate");
  std::vector<FlagSpec> pipeline_flags(data_flags);
  pipeline_flags.insert(pipeline_flags.end(), fuzz_flags.begin(), fuzz_flags.end());
  for (FlagSpec f : {FlagSpec{"--hidden", "model.hidden"}, FlagSpec{"--source", "pipeline.source"},
                     FlagSpec{"--cc-section", "pipeline.cc_section"}, FlagSpec{"--selector", "select.selector"},
                     FlagSpec{"--n", "select.n"}, FlagSpec{"--retrain-epochs", "retrain.epochs"},
                     FlagSpec{"--retrain-lr", "retrain.lr"}, FlagSpec{"--output-dir", "run.output_dir"}}) {
    pipeline_flags.push_back(f);
  }
  add_common(pipeline_cmd, pipeline_common, pipeline_flags);

  // grid
  CommonOptions grid_common;
  std::vector<std::string> grid_variants;
  auto* grid_cmd = app.add_subcommand("grid", "run pipeline variants against shared artifacts");
  add_common(grid_cmd, grid_common, {{"--output-dir", "run.output_dir"}});
  grid_cmd->add_option("--variant", grid_variants, "variant as id:section.key=value;... (repeatable)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) {
      const PipelineConfig cfg = resolve_config(train_common);
      const auto prepared = prepare_model(cfg);
      save_model(prepared->model, train_out);
      if (!train_splits.empty()) {
        std::filesystem::create_directories(train_splits);
        save_csv(prepared->split.train, std::filesystem::path(train_splits) / "train.csv");
        save_csv(prepared->split.val, std::filesystem::path(train_splits) / "val.csv");
        save_csv(prepared->split.test, std::filesystem::path(train_splits) / "test.csv");
      }
      out << stable_dump(nlohmann::json{{"train_accuracy", accuracy(prepared->model, prepared->split.train)},
                                        {"test_accuracy", accuracy(prepared->model, prepared->split.test)},
                                        {"final_loss", prepared->epoch_loss.empty() ? 0.0 : prepared->epoch_loss.back()}});
      return kExitOk;
    }
    if (fuzz_cmd->parsed()) {
      PipelineConfig cfg = resolve_config(fuzz_common);
      const Mlp model = load_model(fuzz_model);
      const Dataset data = load_csv(fuzz_data, cfg.data.normalization, model.num_classes());
      cfg.fuzz.seed = campaign_seed(cfg);
      const CampaignResult result = context_fuzz(model, make_seeds(model, data), cfg.fuzz);
      save_pool(result.pool, fuzz_out);
      if (!fuzz_log.empty()) write_text(fuzz_log, format_campaign_log(result.log));
      out << stable_dump(nlohmann::json{{"pool_size", result.pool.size()},
                                        {"seeds_with_cases", result.pool.seed_count()},
                                        {"init_attempts", result.init_attempts},
                                        {"attempts", result.attempts}});
      return kExitOk;
    }
    if (select_cmd->parsed()) {
      const PipelineConfig cfg = resolve_config(select_common);
      TestPool pool = load_pool(select_pool);
      std::optional<Mlp> model;
      if (!select_model.empty()) model = load_model(select_model);
      const auto flat = pool.flatten();
      const bool missing_cc = std::any_of(flat.begin(), flat.end(), [](const TestCase& tc) { return !tc.cc; });
      if (missing_cc && cfg.selector == Selector::kContext) {
        if (!model) throw UsageError("the pool lacks cc values; pass --model to compute them");
        Rng rng = Rng(cfg.seed).derive(kPoolCcStream);
        annotate_cc(*model, pool, ContextNoise::draw(cfg.fuzz.cc_params(), model->input_dim(), rng));
      }
      if (!model && cfg.selector != Selector::kContext && cfg.selector != Selector::kRandom) {
        throw UsageError("selector " + to_string(cfg.selector) + " needs --model");
      }
      if (cfg.n == 0) throw UsageError("select.n must be >= 1");
      const Mlp& scorer = model ? *model : Mlp::zeros(std::vector<std::size_t>{1, 1});
      const TestSuite suite = select_suite(cfg, pool, scorer);
      save_suite(suite, pool.guiding_metric(), select_out);
      for (const auto& w : suite.warnings) err << "warning: " << w << "\n";
      out << stable_dump(nlohmann::json{{"suite_size", suite.size()}, {"pool_size", pool.size()}});
      return kExitOk;
    }
    if (retrain_cmd->parsed()) {
      const PipelineConfig cfg = resolve_config(retrain_common);
      const Mlp model = load_model(retrain_model);
      const TestSuite suite = load_suite(retrain_suite);
      const Dataset data = load_csv(retrain_data, cfg.data.normalization, model.num_classes());
      Rng rng = Rng(cfg.seed).derive(kRetrainStream);
      const Mlp after = retrain(model, suite, data, cfg.retrain, rng);
      save_model(after, retrain_out);
      out << stable_dump(nlohmann::json{{"suite_size", suite.size()},
                                        {"train_accuracy_before", accuracy(model, data)},
                                        {"train_accuracy_after", accuracy(after, data)}});
      return kExitOk;
    }
    if (eval_cmd->parsed()) {
      const PipelineConfig cfg = resolve_config(eval_common);
      if (eval_universe.empty() && eval_data.empty()) throw UsageError("eval needs --universe and/or --data");
      const Mlp model = load_model(eval_model);
      nlohmann::json result = nlohmann::json::object();
      if (!eval_universe.empty()) {
        const auto universe = load_pool(eval_universe).flatten();
        result["universe_size"] = universe.size();
        result["robust_accuracy"] = robust_accuracy(model, universe);
      }
      if (!eval_data.empty()) {
        result["test_accuracy"] = accuracy(model, load_csv(eval_data, cfg.data.normalization, model.num_classes()));
      }
      out << stable_dump(result);
      return kExitOk;
    }
    if (pipeline_cmd->parsed()) {
      const PipelineConfig cfg = resolve_config(pipeline_common);
      try {
        cfg.validate();
      } catch (const InputError& e) {
        throw UsageError(e.what());
      }
      const Report report = run_pipeline(cfg);
      out << format_report_json(report);
      return kExitOk;
    }
    if (grid_cmd->parsed()) {
      std::vector<Variant> variants;
      const PipelineConfig cfg = resolve_config(grid_common, &variants);
      try {
        for (const std::string& text : grid_variants) {
          const auto colon = text.find(':');
          if (colon == std::string::npos || colon == 0) throw InputError("variant must look like id:key=value;...");
          variants.push_back(Variant{text.substr(0, colon), parse_assignments(text.substr(colon + 1))});
        }
      } catch (const InputError& e) {
        throw UsageError(e.what());
      }
      const auto reports = run_experiment_grid(cfg, variants);
      out << format_grid_csv(reports);
      for (const Report& r : reports) {
        if (r.status.rfind("error", 0) == 0) err << r.variant_id << ": " << r.status << "\n";
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace clover
