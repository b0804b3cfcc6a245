#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "clover/attack.hpp"
#include "clover/metrics.hpp"
#include "clover/nn.hpp"
#include "clover/rng.hpp"
#include "clover/test_pool.hpp"

namespace clover {

enum class GuidingMetric { kCC, kGini, kFOL };
enum class SelectOrder { kHighest, kLowest };
// When a seed changes equivalence class: on every kept test case, or only
// when its best perturbation is replaced.
enum class EqUpdate { kEveryCase, kOnBeta };

GuidingMetric parse_guiding_metric(const std::string& text);
std::string to_string(GuidingMetric metric);
SelectOrder parse_select_order(const std::string& text);
std::string to_string(SelectOrder order);
EqUpdate parse_eq_update(const std::string& text);
std::string to_string(EqUpdate mode);

// Either limit may be set; the campaign stops at whichever is hit first.
struct Budget {
  std::optional<std::size_t> attempts = 5000;
  std::optional<double> seconds;
};

struct FuzzConfig {
  double epsilon = 0.05;
  double delta = 0.01;
  std::size_t k = 20;
  std::size_t m = 5;
  double max_lr = 0.2;
  PNorm p_norm = PNorm::kLinf;
  bool raw_gradient = false;
  Budget budget;
  GuidingMetric guiding_metric = GuidingMetric::kCC;
  SelectOrder select_order = SelectOrder::kHighest;
  bool use_seed_equivalence = true;
  EqUpdate eq_update = EqUpdate::kEveryCase;
  std::uint64_t seed = 0;

  void validate() const;
  AttackConfig attack() const;
  CCParams cc_params() const { return CCParams{k, delta}; }
  // ceil(epsilon / delta)
  std::size_t translate_steps() const;
};

// |max_lr * sin(pi * r / (steps + 1))|
double cyclic_rate(std::size_t r, std::size_t steps, double max_lr);

struct Seed {
  SeedId id = 0;
  std::vector<double> x;
  ClassId label = 0;
};

// Seed i is sample i. The label is the ground truth when present, otherwise
// the model's prediction.
std::vector<Seed> make_seeds(const Classifier& model, const Dataset& data);

// Best known perturbation of a seed. A seed without any test case has a zero
// delta and adversarial label kNoLabel.
struct Afo {
  std::vector<double> delta;
  ClassId seed_label = 0;
  ClassId adversarial_label = kNoLabel;
  double cc_star = 0.0;

  bool operator==(const Afo&) const = default;
};

using AdversarialFront = std::vector<Afo>;

// Seeds partitioned by (seed label, adversarial label or kNoLabel). Seed ids
// are 0..n-1.
class EquivalenceIndex {
 public:
  EquivalenceIndex(std::size_t num_classes, std::span<const ClassId> seed_labels);

  void record_label(SeedId seed, ClassId v);
  const std::set<SeedId>& class_members(SeedId seed) const;
  ClassId column_of(SeedId seed) const;
  ClassId seed_label(SeedId seed) const;
  // Column kNoLabel selects the unlabelled cell.
  const std::set<SeedId>& cell(ClassId row, ClassId column) const;

  std::size_t num_classes() const { return num_classes_; }
  std::size_t num_seeds() const { return labels_.size(); }
  // True when the cells are disjoint, cover every seed, and agree with N.
  bool check_partition() const;

 private:
  std::size_t column_index(ClassId column) const;
  void check_seed(SeedId seed) const;

  std::size_t num_classes_;
  std::vector<ClassId> labels_;
  std::vector<ClassId> columns_;
  std::vector<std::set<SeedId>> cells_;  // row-major, num_classes x (num_classes + 1)
};

// ceil(m * I(x) * |X| / sum(I)), computed in integers.
std::vector<std::size_t> compute_energy(std::span<const std::size_t> successes, std::size_t m);

// Perturbations of up to min(energy, |class| - 1) other class members in
// shuffled order; the seed's own perturbation when it has no peers.
std::vector<Afo> build_ac(SeedId seed, const EquivalenceIndex& index, const AdversarialFront& front,
                          std::size_t energy, Rng& rng);

// Attempt counter plus optional wall-clock limit.
class AttemptBudget {
 public:
  explicit AttemptBudget(const Budget& budget);

  bool exhausted() const;
  void consume() { ++used_; }
  std::size_t used() const { return used_; }

 private:
  std::optional<std::size_t> limit_;
  std::optional<double> seconds_;
  std::chrono::steady_clock::time_point start_;
  std::size_t used_ = 0;
};

double guiding_value(GuidingMetric metric, const Classifier& model, std::span<const double> x, ClassId seed_label,
                     ClassId adversarial_label, const ContextNoise& noise, double epsilon);

// True when `score` should replace `best` under the configured order.
bool improves(double score, double best, SelectOrder order);
double initial_cc_star(SelectOrder order);

struct CampaignEvent {
  std::size_t attempt = 0;  // 1-based, counting translate attempts only; 0 during init
  std::string phase;        // "init" or "translate"
  SeedId seed_id = 0;
  std::string outcome;  // "benign", "kept" or "evolved"
  ClassId adversarial_label = kNoLabel;
  double score = 0.0;
  double cc_star = 0.0;
  std::size_t round = 0;
};

struct CampaignState {
  const EquivalenceIndex& index;
  const AdversarialFront& front;
  std::span<const std::size_t> successes;
};

struct CampaignHooks {
  std::function<void(const CampaignEvent&, const CampaignState&)> on_event;
  // Called with the combined direction of every translate attempt.
  std::function<void(SeedId, std::span<const double> direction, std::span<const double> gradient)> on_direction;
};

struct TranslateContext {
  AttemptBudget& budget;
  const ContextNoise& noise;
  EquivalenceIndex* index = nullptr;
  std::vector<CampaignEvent>* log = nullptr;
  const CampaignHooks* hooks = nullptr;
  const AdversarialFront* front = nullptr;
  std::span<const std::size_t> successes{};
  std::size_t round = 0;
};

struct TranslateResult {
  Afo beta;
  std::vector<TestCase> cases;
  std::size_t evolved = 0;
};

// One fuzzing round on one seed: one candidate per entry of `ac` while the
// budget lasts.
TranslateResult context_translate(const Classifier& model, const Seed& seed, std::span<const Afo> ac,
                                  const Afo& beta, std::span<const double> grad, const FuzzConfig& cfg,
                                  TranslateContext& ctx);

struct CampaignResult {
  TestPool pool;
  AdversarialFront front;
  std::vector<std::size_t> successes;
  EquivalenceIndex index;
  std::vector<CampaignEvent> log;
  std::size_t init_attempts = 0;
  std::size_t attempts = 0;  // after initialization
  std::size_t rounds = 0;    // completed passes over the seed list
};

// Seed ids must be 0..n-1 in order.
CampaignResult context_fuzz(const Classifier& model, std::span<const Seed> seeds, const FuzzConfig& cfg,
                            const CampaignHooks& hooks = {});

nlohmann::json to_json(const CampaignEvent& event);
std::string format_campaign_log(std::span<const CampaignEvent> events);
std::vector<CampaignEvent> parse_campaign_log(const std::string& text);

}  // namespace clover
