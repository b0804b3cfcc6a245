#include "clover/pipeline.hpp"

#include <chrono>
#include <fstream>

#include "clover/config.hpp"
#include "clover/json_format.hpp"

namespace clover {

namespace {

std::string fingerprint(const PipelineConfig& cfg, std::initializer_list<std::string_view> prefixes) {
  std::string out;
  for (const auto& [key, value] : config_settings(cfg)) {
    for (std::string_view p : prefixes) {
      if (key.rfind(p, 0) == 0) {
        out += key + "=" + value + "\n";
        break;
      }
    }
  }
  return out;
}

std::string model_key(const PipelineConfig& cfg) {
  return fingerprint(cfg, {"data.", "model.", "train.", "run.seed"});
}

std::string universe_key(const PipelineConfig& cfg) {
  return model_key(cfg) + fingerprint(cfg, {"attack.", "assessment.", "fuzz.epsilon", "fuzz.p_norm",
                                            "fuzz.raw_gradient"});
}

std::string pool_key(const PipelineConfig& cfg) {
  return model_key(cfg) + fingerprint(cfg, {"attack.", "fuzz.", "pipeline.source", "pipeline.pool_per_attacker_count"});
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

PoolSource parse_pool_source(const std::string& text) {
  if (text == "clover") return PoolSource::kClover;
  if (text == "fgsm_pgd_universe" || text == "fgsm_pgd") return PoolSource::kFgsmPgdUniverse;
  throw InputError("unknown pool source '" + text + "' (expected clover or fgsm_pgd_universe)");
}

std::string to_string(PoolSource source) { return source == PoolSource::kClover ? "clover" : "fgsm_pgd_universe"; }

void PipelineConfig::validate() const {
  if (n == 0) throw InputError("select.n must be >= 1");
  if (!(retrain.lr > 0.0)) throw InputError("retrain.lr must be positive");
  if (retrain.batch_size == 0 || train.batch_size == 0) throw InputError("batch sizes must be >= 1");
  for (std::size_t w : hidden) {
    if (w == 0) throw InputError("model.hidden widths must be >= 1");
  }
  if (!data.csv) data.synthetic.validate();
  fuzz.validate();
  attack_config().validate();
  if (km_sections == 0) throw InputError("select.km_sections must be >= 1");
  if (cc_sections == 0) throw InputError("pipeline.cc_sections must be >= 1");
  if (!cc_section.empty() && cc_section != "top" && cc_section != "bottom") {
    std::size_t index = 0;
    try {
      std::size_t used = 0;
      index = std::stoul(cc_section, &used);
      if (used != cc_section.size()) throw InputError("");
    } catch (const std::exception&) {
      throw InputError("pipeline.cc_section must be an index, top or bottom");
    }
    if (index >= cc_sections) throw InputError("pipeline.cc_section out of range");
  }
}

AttackConfig PipelineConfig::attack_config() const {
  AttackConfig a;
  a.epsilon = fuzz.epsilon;
  a.p_norm = fuzz.p_norm;
  a.raw_gradient = fuzz.raw_gradient;
  a.fgsm_step = attack.fgsm_step.value_or(fuzz.epsilon);
  a.pgd_step = attack.pgd_step.value_or(fuzz.epsilon / 6.0);
  a.pgd_iters = attack.pgd_iters;
  return a;
}

std::shared_ptr<const PreparedModel> prepare_model(const PipelineConfig& cfg, PipelineCache* cache) {
  const std::string key = model_key(cfg);
  if (cache) {
    if (auto it = cache->models.find(key); it != cache->models.end()) return it->second;
  }
  const Rng root(cfg.seed);
  Dataset data;
  if (cfg.data.csv) {
    data = load_csv(*cfg.data.csv, cfg.data.normalization);
  } else {
    SyntheticSpec spec = cfg.data.synthetic;
    spec.seed = root.derive(kDataStream).seed();
    data = generate_synthetic(spec);
  }
  if (!data.fully_labeled()) throw InputError("pipeline: the dataset must be fully labeled");
  Rng split_rng = root.derive(kSplitStream);
  DataSplit parts = split(data, cfg.data.split, split_rng);
  if (parts.train.empty() || parts.test.empty()) throw InputError("pipeline: train and test splits must be non-empty");

  std::vector<std::size_t> dims{data.dim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(data.num_classes);
  Rng model_rng = root.derive(kModelStream);
  const Mlp init = Mlp::random(dims, model_rng);
  TrainResult trained = train(init, parts.train, cfg.train, model_rng);

  auto prepared = std::make_shared<const PreparedModel>(
      PreparedModel{std::move(parts), std::move(trained.model), std::move(trained.epoch_loss)});
  if (cache) cache->models[key] = prepared;
  return prepared;
}

std::shared_ptr<const UniverseResult> prepare_universe(const PipelineConfig& cfg, const PreparedModel& model,
                                                       PipelineCache* cache) {
  const std::string key = universe_key(cfg);
  if (cache) {
    if (auto it = cache->universes.find(key); it != cache->universes.end()) return it->second;
  }
  Rng rng = Rng(cfg.seed).derive(kUniverseStream);
  auto universe = std::make_shared<const UniverseResult>(
      build_universe(model.model, model.split.test, cfg.attack_config(), cfg.per_attacker_count, rng));
  if (cache) cache->universes[key] = universe;
  return universe;
}

std::shared_ptr<const PreparedPool> prepare_pool(const PipelineConfig& cfg, const PreparedModel& model,
                                                 PipelineCache* cache) {
  const std::string key = pool_key(cfg);
  if (cache) {
    if (auto it = cache->pools.find(key); it != cache->pools.end()) return it->second;
  }
  const Rng root(cfg.seed);
  PreparedPool prepared;
  if (cfg.source == PoolSource::kClover) {
    FuzzConfig fuzz = cfg.fuzz;
    fuzz.seed = root.derive(kPoolStream).seed();
    const std::vector<Seed> seeds = make_seeds(model.model, model.split.train);
    CampaignResult campaign = context_fuzz(model.model, seeds, fuzz);
    prepared.pool = std::move(campaign.pool);
    prepared.log = std::move(campaign.log);
  } else {
    Rng rng = root.derive(kPoolStream);
    UniverseResult universe =
        build_universe(model.model, model.split.train, cfg.attack_config(), cfg.pool_per_attacker_count, rng);
    prepared.pool = std::move(universe.pool);
    prepared.warnings = std::move(universe.warnings);
    Rng noise_rng = root.derive(kPoolCcStream);
    const ContextNoise noise = ContextNoise::draw(cfg.fuzz.cc_params(), model.model.input_dim(), noise_rng);
    annotate_cc(model.model, prepared.pool, noise);
    for (auto& [seed, list] : prepared.pool.mutable_by_seed()) {
      for (TestCase& tc : list) tc.score = *tc.cc;
    }
  }
  auto shared = std::make_shared<const PreparedPool>(std::move(prepared));
  if (cache) cache->pools[key] = shared;
  return shared;
}

TestPool restrict_to_section(const PipelineConfig& cfg, const TestPool& pool, std::vector<std::string>& warnings) {
  if (cfg.cc_section.empty()) return pool;
  const auto ranges = equal_cc_ranges(cfg.cc_sections);
  std::vector<TestPool> parts = partition_by_cc(pool, ranges);
  std::size_t index = 0;
  if (cfg.cc_section == "top" || cfg.cc_section == "bottom") {
    std::vector<std::size_t> non_empty;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (!parts[i].empty()) non_empty.push_back(i);
    }
    if (non_empty.empty()) {
      warnings.push_back("every CC section is empty");
      return TestPool(pool.guiding_metric());
    }
    index = cfg.cc_section == "top" ? non_empty.back() : non_empty.front();
  } else {
    index = std::stoul(cfg.cc_section);
  }
  if (parts[index].empty()) warnings.push_back("CC section " + std::to_string(index) + " is empty");
  return std::move(parts[index]);
}

TestSuite select_suite(const PipelineConfig& cfg, const TestPool& pool, const Classifier& model) {
  Rng rng = Rng(cfg.seed).derive(kSelectStream);
  switch (cfg.selector) {
    case Selector::kContext: return context_select(pool, cfg.n, cfg.fuzz.select_order);
    case Selector::kRandom: return random_select(pool, cfg.n, rng);
    case Selector::kGini: return gini_order_select(pool, cfg.n, model);
    case Selector::kBeSt: return be_st(pool, cfg.n, model, cfg.fuzz.epsilon);
    case Selector::kKmSt: return km_st(pool, cfg.n, cfg.km_sections, model, cfg.fuzz.epsilon, rng);
  }
  throw InputError("unknown selector");
}

Mlp retrain(const Mlp& model, const TestSuite& suite, const Dataset& train_data, const TrainOptions& options,
            Rng& rng) {
  Dataset combined = train_data;
  combined.name = train_data.name + "+suite";
  for (const TestCase& tc : suite.cases) {
    if (tc.seed_label < 0 || static_cast<std::size_t>(tc.seed_label) >= combined.num_classes) {
      throw InputError("retrain: suite case without a valid seed label");
    }
    combined.samples.push_back(Sample{tc.data, tc.seed_label});
  }
  if (options.epochs == 0 || combined.empty()) return model;
  return train(model, combined, options, rng).model;
}

PipelineRun run_pipeline_full(const PipelineConfig& cfg, PipelineCache* cache) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  PipelineRun run;
  Report& report = run.report;
  report.variant_id = cfg.variant_id;
  report.selector = to_string(cfg.selector);
  report.n = cfg.n;
  report.cc_section = cfg.cc_section;
  report.config = config_settings(cfg);
  report.config.erase("run.output_dir");

  run.prepared = prepare_model(cfg, cache);
  run.universe = prepare_universe(cfg, *run.prepared, cache);
  run.pool = prepare_pool(cfg, *run.prepared, cache);
  const Mlp& before = run.prepared->model;
  const Dataset& test = run.prepared->split.test;
  report.warnings = run.universe->warnings;
  report.warnings.insert(report.warnings.end(), run.pool->warnings.begin(), run.pool->warnings.end());
  report.universe_size = run.universe->pool.size();
  report.pool_size = run.pool->pool.size();
  report.universe_hash = hex64(fnv1a64(format_pool_jsonl(run.universe->pool)));
  report.pool_hash = hex64(fnv1a64(format_pool_jsonl(run.pool->pool)));

  run.selection_pool = restrict_to_section(cfg, run.pool->pool, report.warnings);
  if (!run.selection_pool.empty()) {
    run.suite = select_suite(cfg, run.selection_pool, before);
    report.warnings.insert(report.warnings.end(), run.suite.warnings.begin(), run.suite.warnings.end());
  }
  report.suite_size = run.suite.size();

  if (run.suite.cases.empty()) {
    report.status = "no-test-cases";
    run.model_after = before;
  } else {
    Rng rng = Rng(cfg.seed).derive(kRetrainStream);
    run.model_after = retrain(before, run.suite, run.prepared->split.train, cfg.retrain, rng);
  }
  const Mlp& after = *run.model_after;

  const std::vector<TestCase> universe = run.universe->pool.flatten();
  if (universe.empty()) {
    report.warnings.push_back("empty assessment universe; robust accuracy reported as 0");
  } else {
    report.robust_acc_before = robust_accuracy(before, universe);
    report.robust_acc_after = robust_accuracy(after, universe);
  }
  report.improvement = report.robust_acc_after - report.robust_acc_before;
  report.test_acc_before = accuracy(before, test);
  report.test_acc_after = accuracy(after, test);

  if (!run.suite.cases.empty()) {
    report.stats = suite_stats(run.suite.cases).stats;
    Rng noise_rng = Rng(cfg.seed).derive(kEvalStream);
    const ContextNoise noise = ContextNoise::draw(cfg.fuzz.cc_params(), before.input_dim(), noise_rng);
    report.mean_cc_reduction = mean_cc_reduction(run.suite.cases, before, after, noise);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (cfg.output_dir) write_artifacts(cfg, run, *cfg.output_dir);
  return run;
}

Report run_pipeline(const PipelineConfig& cfg, PipelineCache* cache) { return run_pipeline_full(cfg, cache).report; }

nlohmann::json report_to_json(const Report& r) {
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : r.config) config[k] = v;
  return nlohmann::json{{"version", Report::kVersion},
                        {"variant_id", r.variant_id},
                        {"status", r.status},
                        {"selector", r.selector},
                        {"n", r.n},
                        {"suite_size", r.suite_size},
                        {"pool_size", r.pool_size},
                        {"universe_size", r.universe_size},
                        {"cc_section", r.cc_section},
                        {"robust_acc_before", r.robust_acc_before},
                        {"robust_acc_after", r.robust_acc_after},
                        {"improvement", r.improvement},
                        {"test_acc_before", r.test_acc_before},
                        {"test_acc_after", r.test_acc_after},
                        {"adv_labels", r.stats.adv_label_count},
                        {"categories", r.stats.category_count},
                        {"mean_cc", r.stats.mean_cc},
                        {"mean_cc_reduction", r.mean_cc_reduction},
                        {"pool_hash", r.pool_hash},
                        {"universe_hash", r.universe_hash},
                        {"warnings", r.warnings},
                        {"config", config}};
}

Report report_from_json(const nlohmann::json& doc) {
  if (doc.at("version").get<int>() != Report::kVersion) throw InputError("report: unsupported version");
  Report r;
  r.variant_id = doc.at("variant_id").get<std::string>();
  r.status = doc.at("status").get<std::string>();
  r.selector = doc.at("selector").get<std::string>();
  r.n = doc.at("n").get<std::size_t>();
  r.suite_size = doc.at("suite_size").get<std::size_t>();
  r.pool_size = doc.at("pool_size").get<std::size_t>();
  r.universe_size = doc.at("universe_size").get<std::size_t>();
  r.cc_section = doc.at("cc_section").get<std::string>();
  r.robust_acc_before = doc.at("robust_acc_before").get<double>();
  r.robust_acc_after = doc.at("robust_acc_after").get<double>();
  r.improvement = doc.at("improvement").get<double>();
  r.test_acc_before = doc.at("test_acc_before").get<double>();
  r.test_acc_after = doc.at("test_acc_after").get<double>();
  r.stats.adv_label_count = doc.at("adv_labels").get<std::size_t>();
  r.stats.category_count = doc.at("categories").get<std::size_t>();
  r.stats.mean_cc = doc.at("mean_cc").get<double>();
  r.mean_cc_reduction = doc.at("mean_cc_reduction").get<double>();
  r.pool_hash = doc.at("pool_hash").get<std::string>();
  r.universe_hash = doc.at("universe_hash").get<std::string>();
  r.warnings = doc.at("warnings").get<std::vector<std::string>>();
  for (const auto& [k, v] : doc.at("config").items()) r.config[k] = v.get<std::string>();
  return r;
}

std::string format_report_json(const Report& report) { return stable_dump(report_to_json(report)); }

std::string format_grid_csv(const std::vector<Report>& reports) {
  std::string out = std::string(kGridColumns) + "\n";
  for (const Report& r : reports) {
    out += r.variant_id + "," + r.selector + "," + std::to_string(r.n) + "," + format_g6(r.robust_acc_before) + "," +
           format_g6(r.robust_acc_after) + "," + format_g6(r.improvement) + "," + format_g6(r.test_acc_before) +
           "," + format_g6(r.test_acc_after) + "," + std::to_string(r.stats.adv_label_count) + "," +
           std::to_string(r.stats.category_count) + "," + format_g6(r.stats.mean_cc) + "," +
           format_g6(r.mean_cc_reduction) + "," + format_g6(r.seconds) + "\n";
  }
  return out;
}

void write_artifacts(const PipelineConfig& cfg, const PipelineRun& run, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : config_settings(cfg)) config[k] = v;
  config.erase("run.output_dir");
  write_text(dir / "config.json", stable_dump(config));
  save_model(run.prepared->model, dir / "model_before.json");
  save_model(*run.model_after, dir / "model_after.json");
  save_pool(run.pool->pool, dir / "pool.jsonl");
  save_suite(run.suite, run.pool->pool.guiding_metric(), dir / "suite.jsonl");
  save_pool(run.universe->pool, dir / "universe.jsonl");
  write_text(dir / "campaign.log.jsonl", format_campaign_log(run.pool->log));
  write_text(dir / "report.json", format_report_json(run.report));
  write_text(dir / "timing.json", stable_dump(nlohmann::json{{"seconds", run.report.seconds}}));
  write_text(dir / "grid.csv", format_grid_csv({run.report}));
}

std::vector<Report> run_experiment_grid(const PipelineConfig& base, const std::vector<Variant>& variants) {
  PipelineCache cache;
  std::vector<Report> reports;
  for (const Variant& variant : variants) {
    PipelineConfig cfg = base;
    cfg.variant_id = variant.id;
    try {
      for (const auto& [key, value] : variant.settings) apply_setting(cfg, key, value);
      cfg.output_dir = base.output_dir ? std::optional(*base.output_dir / variant.id) : std::nullopt;
      reports.push_back(run_pipeline(cfg, &cache));
    } catch (const std::exception& e) {
      Report failed;
      failed.variant_id = variant.id;
      failed.status = std::string("error: ") + e.what();
      failed.selector = to_string(cfg.selector);
      failed.n = cfg.n;
      reports.push_back(std::move(failed));
    }
  }
  if (base.output_dir) {
    std::filesystem::create_directories(*base.output_dir);
    write_text(*base.output_dir / "grid.csv", format_grid_csv(reports));
  }
  return reports;
}

}  // namespace clover
