#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "clover/attack.hpp"
#include "clover/data.hpp"
#include "clover/fuzzer.hpp"
#include "clover/metrics.hpp"
#include "clover/nn.hpp"
#include "clover/select.hpp"
#include "clover/test_pool.hpp"

namespace clover {

// Random stream ids derived from the root seed.
enum RngStream : std::uint64_t {
  kDataStream = 1,
  kModelStream = 2,
  kUniverseStream = 3,
  kPoolStream = 4,
  kSelectStream = 5,
  kRetrainStream = 6,
  kEvalStream = 7,
  kPoolCcStream = 8,
  kSplitStream = 9,
};

enum class PoolSource { kClover, kFgsmPgdUniverse };
PoolSource parse_pool_source(const std::string& text);
std::string to_string(PoolSource source);

struct DataConfig {
  SyntheticSpec synthetic{SyntheticKind::kBlobs, 3, 8, 250, 0.12, 0};
  std::optional<std::filesystem::path> csv;
  Normalization normalization = Normalization::kNone;
  SplitFractions split;
};

struct AttackSteps {
  std::optional<double> fgsm_step;  // defaults to epsilon
  std::optional<double> pgd_step;   // defaults to epsilon / 6
  std::size_t pgd_iters = 10;
};

struct PipelineConfig {
  DataConfig data;
  std::vector<std::size_t> hidden{32};
  TrainOptions train;
  FuzzConfig fuzz;
  AttackSteps attack;
  PoolSource source = PoolSource::kFgsmPgdUniverse;
  std::size_t pool_per_attacker_count = 1500;
  Selector selector = Selector::kContext;
  std::size_t n = 200;
  std::size_t km_sections = 4;
  // Restrict the pool to one of `cc_sections` equal CC ranges before
  // selection: an index, "top" or "bottom" (highest / lowest non-empty).
  std::string cc_section;
  std::size_t cc_sections = 5;
  TrainOptions retrain{20, 0.01, 32};
  std::size_t per_attacker_count = 300;
  std::uint64_t seed = 0;
  std::string variant_id = "base";
  std::optional<std::filesystem::path> output_dir;

  void validate() const;
  AttackConfig attack_config() const;
};

struct Report {
  static constexpr int kVersion = 1;

  std::string variant_id;
  std::string status = "ok";
  std::string selector;
  std::size_t n = 0;
  std::size_t suite_size = 0;
  std::size_t pool_size = 0;
  std::size_t universe_size = 0;
  std::string cc_section;
  double robust_acc_before = 0.0;
  double robust_acc_after = 0.0;
  double improvement = 0.0;
  double test_acc_before = 0.0;
  double test_acc_after = 0.0;
  SuiteStats stats;
  double mean_cc_reduction = 0.0;
  std::string pool_hash;
  std::string universe_hash;
  std::vector<std::string> warnings;
  std::map<std::string, std::string> config;
  double seconds = 0.0;  // wall clock; kept out of report.json

  bool operator==(const Report&) const = default;
};

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& doc);
std::string format_report_json(const Report& report);

inline constexpr const char* kGridColumns =
    "variant_id,selector,n,robust_acc_before,robust_acc_after,improvement,test_acc_before,test_acc_after,"
    "adv_labels,categories,mean_cc,mean_cc_reduction,seconds";
std::string format_grid_csv(const std::vector<Report>& reports);

// Intermediate products shared between runs that agree on the inputs.
struct PreparedModel {
  DataSplit split;
  Mlp model;
  std::vector<double> epoch_loss;
};

struct PreparedPool {
  TestPool pool;  // every case carries a cc value
  std::vector<CampaignEvent> log;
  std::vector<std::string> warnings;
};

struct PipelineCache {
  std::map<std::string, std::shared_ptr<const PreparedModel>> models;
  std::map<std::string, std::shared_ptr<const UniverseResult>> universes;
  std::map<std::string, std::shared_ptr<const PreparedPool>> pools;
};

struct PipelineRun {
  Report report;
  std::shared_ptr<const PreparedModel> prepared;
  std::shared_ptr<const UniverseResult> universe;
  std::shared_ptr<const PreparedPool> pool;
  TestPool selection_pool;  // pool after the optional CC-section restriction
  TestSuite suite;
  std::optional<Mlp> model_after;
};

std::shared_ptr<const PreparedModel> prepare_model(const PipelineConfig& cfg, PipelineCache* cache = nullptr);
std::shared_ptr<const UniverseResult> prepare_universe(const PipelineConfig& cfg, const PreparedModel& model,
                                                       PipelineCache* cache = nullptr);
std::shared_ptr<const PreparedPool> prepare_pool(const PipelineConfig& cfg, const PreparedModel& model,
                                                 PipelineCache* cache = nullptr);

// The restricted pool for cfg.cc_section (the whole pool when empty).
TestPool restrict_to_section(const PipelineConfig& cfg, const TestPool& pool, std::vector<std::string>& warnings);

TestSuite select_suite(const PipelineConfig& cfg, const TestPool& pool, const Classifier& model);

// Finetunes `model` on train plus the suite, the suite labelled with its
// seed labels.
Mlp retrain(const Mlp& model, const TestSuite& suite, const Dataset& train_data, const TrainOptions& options,
            Rng& rng);

// Runs every stage and, when cfg.output_dir is set, writes the artifacts.
PipelineRun run_pipeline_full(const PipelineConfig& cfg, PipelineCache* cache = nullptr);
Report run_pipeline(const PipelineConfig& cfg, PipelineCache* cache = nullptr);

void write_artifacts(const PipelineConfig& cfg, const PipelineRun& run, const std::filesystem::path& dir);

struct Variant {
  std::string id;
  std::vector<std::pair<std::string, std::string>> settings;  // section.key -> value
};

// One report per variant, in order. Failing variants yield a report whose
// status starts with "error". Writes grid.csv when base.output_dir is set.
std::vector<Report> run_experiment_grid(const PipelineConfig& base, const std::vector<Variant>& variants);

}  // namespace clover
