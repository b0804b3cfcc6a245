#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "clover/data.hpp"
#include "clover/fuzzer.hpp"
#include "oracles.hpp"

namespace clover {
namespace {

using testing::ConstantModel;

struct Fixture {
  Dataset data;
  Mlp model;
  std::vector<Seed> seeds;
};

Fixture random_model_on_blobs(std::size_t per_class, std::uint64_t seed) {
  Dataset data = generate_synthetic(SyntheticSpec{SyntheticKind::kBlobs, 3, 8, per_class, 0.12, seed});
  Rng rng(seed + 1);
  const std::vector<std::size_t> dims{8, 16, 3};
  Mlp model = Mlp::random(dims, rng);
  std::vector<Seed> seeds = make_seeds(model, data);
  return {std::move(data), std::move(model), std::move(seeds)};
}

FuzzConfig small_config(std::size_t attempts) {
  FuzzConfig cfg;
  cfg.budget.attempts = attempts;
  cfg.seed = 42;
  return cfg;
}

double linf(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

TEST(Energy, UniformSuccessesGiveM) {
  const std::vector<std::size_t> successes(7, 4);
  for (std::size_t e : compute_energy(successes, 5)) EXPECT_EQ(e, 5u);
}

TEST(Energy, TwoSeedExample) {
  const std::vector<std::size_t> successes{1, 3};
  EXPECT_EQ(compute_energy(successes, 5), (std::vector<std::size_t>{3, 8}));
}

TEST(Energy, SumWithinCeilingSlack) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    const std::size_t m = 1 + rng.below(10);
    std::vector<std::size_t> successes(n);
    for (auto& s : successes) s = 1 + rng.below(50);
    const auto energy = compute_energy(successes, m);
    std::size_t total = 0;
    for (std::size_t e : energy) {
      EXPECT_GE(e, 1u);
      total += e;
    }
    EXPECT_GE(total, m * n);
    EXPECT_LE(total, m * n + n);
  }
}

TEST(CyclicRate, FiveStepSchedule) {
  EXPECT_NEAR(cyclic_rate(1, 5, 0.2), 0.1, 1e-15);
  EXPECT_NEAR(cyclic_rate(2, 5, 0.2), 0.2 * std::sin(M_PI / 3.0), 1e-15);
  EXPECT_NEAR(cyclic_rate(3, 5, 0.2), 0.2, 1e-15);
  EXPECT_NEAR(cyclic_rate(5, 5, 0.2), 0.1, 1e-15);
}

TEST(FuzzConfig, DefaultsAndSteps) {
  const FuzzConfig cfg;
  EXPECT_EQ(cfg.translate_steps(), 5u);
  EXPECT_NO_THROW(cfg.validate());
  FuzzConfig bad = cfg;
  bad.delta = 0.05;
  EXPECT_THROW(bad.validate(), InputError);
  FuzzConfig no_limit = cfg;
  no_limit.budget.attempts.reset();
  EXPECT_THROW(no_limit.validate(), InputError);
}

TEST(EquivalenceIndex, FreshClassesAreSeedLabels) {
  const std::vector<ClassId> labels{0, 1, 0, 2, 0};
  const EquivalenceIndex idx(3, labels);
  EXPECT_EQ(idx.class_members(0), (std::set<SeedId>{0, 2, 4}));
  EXPECT_EQ(idx.class_members(3), (std::set<SeedId>{3}));
  EXPECT_EQ(idx.column_of(1), kNoLabel);
  EXPECT_TRUE(idx.check_partition());
}

TEST(EquivalenceIndex, RecordMovesSeed) {
  const std::vector<ClassId> labels{0, 1, 0, 2, 0};
  EquivalenceIndex idx(3, labels);
  idx.record_label(2, 1);
  EXPECT_EQ(idx.class_members(2), (std::set<SeedId>{2}));
  EXPECT_EQ(idx.class_members(0), (std::set<SeedId>{0, 4}));
  idx.record_label(2, 1);
  EXPECT_EQ(idx.cell(0, 1), (std::set<SeedId>{2}));
  idx.record_label(2, 2);
  EXPECT_TRUE(idx.cell(0, 1).empty());
  EXPECT_EQ(idx.cell(0, 2), (std::set<SeedId>{2}));
  EXPECT_TRUE(idx.check_partition());
}

TEST(EquivalenceIndex, UnknownSeedThrows) {
  const std::vector<ClassId> labels{0, 1};
  const EquivalenceIndex idx(2, labels);
  EXPECT_THROW(idx.class_members(5), InputError);
}

TEST(EquivalenceIndex, RandomUpdatesKeepPartition) {
  Rng rng(3);
  std::vector<ClassId> labels(30);
  for (auto& l : labels) l = static_cast<ClassId>(rng.below(4));
  EquivalenceIndex idx(4, labels);
  for (int update = 0; update < 1000; ++update) {
    const SeedId s = rng.below(30);
    const auto pick = rng.below(5);
    const ClassId v = pick == 4 ? kNoLabel : static_cast<ClassId>(pick);
    idx.record_label(s, v);
    ASSERT_EQ(idx.column_of(s), v);
    ASSERT_TRUE(idx.class_members(s).contains(s));
    ASSERT_TRUE(idx.check_partition());
  }
}

AdversarialFront numbered_front(std::size_t n) {
  AdversarialFront front(n);
  for (std::size_t i = 0; i < n; ++i) front[i].delta = {static_cast<double>(i)};
  return front;
}

TEST(BuildAc, SingletonGetsOwnPerturbation) {
  const std::vector<ClassId> labels{0, 1};
  const EquivalenceIndex idx(2, labels);
  const AdversarialFront front = numbered_front(2);
  Rng rng(1);
  const auto ac = build_ac(1, idx, front, 5, rng);
  ASSERT_EQ(ac.size(), 1u);
  EXPECT_EQ(ac[0].delta[0], 1.0);
}

TEST(BuildAc, DistinctPeersCappedByEnergy) {
  const std::vector<ClassId> labels(7, 0);
  const EquivalenceIndex idx(2, labels);
  const AdversarialFront front = numbered_front(7);
  Rng rng(1);
  const auto ac = build_ac(0, idx, front, 3, rng);
  ASSERT_EQ(ac.size(), 3u);
  std::set<double> members;
  for (const Afo& a : ac) members.insert(a.delta[0]);
  EXPECT_EQ(members.size(), 3u);
  EXPECT_FALSE(members.contains(0.0));
  EXPECT_EQ(build_ac(0, idx, front, 100, rng).size(), 6u);
}

TEST(BuildAc, SameRngSameOrder) {
  const std::vector<ClassId> labels(10, 1);
  const EquivalenceIndex idx(2, labels);
  const AdversarialFront front = numbered_front(10);
  Rng a(9);
  Rng b(9);
  EXPECT_EQ(build_ac(4, idx, front, 5, a), build_ac(4, idx, front, 5, b));
}

TEST(GuidingValue, Dispatch) {
  testing::LookupModel stub(1, 2);
  stub.add({0.495}, {0.90, 0.10});
  stub.add({0.500}, {0.11, 0.89});
  stub.add({0.505}, {0.70, 0.30});
  const ContextNoise noise(3, 1, {-0.005, 0.0, 0.005});
  const std::vector<double> x{0.5};
  EXPECT_NEAR(guiding_value(GuidingMetric::kCC, stub, x, 1, 0, noise, 0.05), 0.57, 1e-12);
  EXPECT_EQ(guiding_value(GuidingMetric::kGini, ConstantModel({0.0, 1.0}), x, 0, 1, noise, 0.05), 0.0);
  EXPECT_EQ(guiding_value(GuidingMetric::kFOL, ConstantModel({0.5, 0.5}), x, 0, 1, noise, 0.05), 0.0);
}

TEST(Improves, StrictAndOrderAware) {
  EXPECT_TRUE(improves(0.5, initial_cc_star(SelectOrder::kHighest), SelectOrder::kHighest));
  EXPECT_TRUE(improves(0.5, initial_cc_star(SelectOrder::kLowest), SelectOrder::kLowest));
  EXPECT_FALSE(improves(0.5, 0.5, SelectOrder::kHighest));
  EXPECT_FALSE(improves(0.5, 0.5, SelectOrder::kLowest));
  EXPECT_TRUE(improves(0.4, 0.5, SelectOrder::kLowest));
}

TEST(ContextTranslate, NoAdversarialLeavesBetaUnchanged) {
  ConstantModel model({0.9, 0.1});
  model.set_dim(2);
  const Seed seed{0, {0.3, 0.4}, 0};
  const Afo beta{{0.0, 0.0}, 0, kNoLabel, -INFINITY};
  const std::vector<Afo> ac{beta, beta};
  const std::vector<double> grad{0.0, 0.0};
  const FuzzConfig cfg;
  AttemptBudget budget(Budget{10, std::nullopt});
  const ContextNoise noise(1, 2, {0.0, 0.0});
  TranslateContext ctx{budget, noise};
  const TranslateResult r = context_translate(model, seed, ac, beta, grad, cfg, ctx);
  EXPECT_EQ(r.beta, beta);
  EXPECT_TRUE(r.cases.empty());
  EXPECT_EQ(r.evolved, 0u);
  EXPECT_EQ(budget.used(), 2u);
}

TEST(ContextTranslate, StopsWhenBudgetRunsOut) {
  ConstantModel model({0.9, 0.1});
  model.set_dim(1);
  const Seed seed{0, {0.3}, 0};
  const Afo beta{{0.0}, 0, kNoLabel, -INFINITY};
  const std::vector<Afo> ac(5, beta);
  AttemptBudget budget(Budget{2, std::nullopt});
  const ContextNoise noise(1, 1, {0.0});
  TranslateContext ctx{budget, noise};
  context_translate(model, seed, ac, beta, std::vector<double>{0.0}, FuzzConfig{}, ctx);
  EXPECT_EQ(budget.used(), 2u);
  EXPECT_TRUE(budget.exhausted());
}

TEST(ContextFuzz, ZeroBudgetWithoutHitsIsEmpty) {
  ConstantModel model({0.9, 0.1});
  model.set_dim(2);
  const std::vector<Seed> seeds{{0, {0.1, 0.2}, 0}, {1, {0.5, 0.5}, 0}, {2, {0.9, 0.1}, 0}};
  const CampaignResult r = context_fuzz(model, seeds, small_config(0));
  EXPECT_TRUE(r.pool.empty());
  EXPECT_EQ(r.attempts, 0u);
  EXPECT_EQ(r.init_attempts, 3u);
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    EXPECT_EQ(r.front[i].delta, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(r.front[i].adversarial_label, kNoLabel);
    EXPECT_EQ(r.successes[i], 1u);
    EXPECT_EQ(r.index.column_of(i), kNoLabel);
  }
}

TEST(ContextFuzz, RejectsOutOfOrderSeedIds) {
  ConstantModel model({0.9, 0.1});
  const std::vector<Seed> seeds{{1, {0.1}, 0}};
  EXPECT_THROW(context_fuzz(model, seeds, small_config(1)), InputError);
}

TEST(ContextFuzz, PoolInvariantsOnRandomModel) {
  const Fixture f = random_model_on_blobs(30, 5);
  const FuzzConfig cfg = small_config(5000);
  const CampaignResult r = context_fuzz(f.model, f.seeds, cfg);
  ASSERT_FALSE(r.pool.empty());
  EXPECT_EQ(r.attempts, 5000u);
  for (const TestCase& tc : r.pool.flatten()) {
    const Seed& seed = f.seeds[tc.seed_id];
    EXPECT_LE(linf(tc.data, seed.x), cfg.epsilon + 1e-12);
    for (double v : tc.data) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_NE(f.model.predict_label(tc.data), seed.label);
    EXPECT_EQ(f.model.predict_label(tc.data), tc.adversarial_label);
    ASSERT_TRUE(tc.cc.has_value());
  }
  // Replay oracle: the front holds the best score each seed ever produced.
  std::map<SeedId, double> best;
  for (const CampaignEvent& e : r.log) {
    if (e.outcome == "benign") continue;
    auto [it, inserted] = best.emplace(e.seed_id, e.score);
    if (!inserted) it->second = std::max(it->second, e.score);
  }
  for (const auto& [id, score] : best) {
    const Afo& afo = r.front[id];
    EXPECT_EQ(afo.cc_star, score);
    // Repeated points are stored once, so match the front by data only.
    bool found = false;
    for (const TestCase& tc : r.pool.by_seed().at(id)) {
      double err = 0.0;
      for (std::size_t j = 0; j < tc.data.size(); ++j) {
        err = std::max(err, std::abs(f.seeds[id].x[j] + afo.delta[j] - tc.data[j]));
      }
      found = found || (err <= 1e-12 && tc.adversarial_label == afo.adversarial_label);
    }
    EXPECT_TRUE(found) << "seed " << id;
  }
  EXPECT_TRUE(r.index.check_partition());
}

TEST(ContextFuzz, ReplayIsBitIdentical) {
  const Fixture f = random_model_on_blobs(20, 6);
  const FuzzConfig cfg = small_config(1500);
  const CampaignResult a = context_fuzz(f.model, f.seeds, cfg);
  const CampaignResult b = context_fuzz(f.model, f.seeds, cfg);
  EXPECT_EQ(format_pool_jsonl(a.pool), format_pool_jsonl(b.pool));
  EXPECT_EQ(format_campaign_log(a.log), format_campaign_log(b.log));
}

void expect_monotone_cc_star(const std::vector<CampaignEvent>& log, SelectOrder order) {
  std::map<SeedId, double> last;
  std::size_t evolutions = 0;
  for (const CampaignEvent& e : log) {
    if (e.outcome != "evolved") continue;
    ++evolutions;
    auto it = last.find(e.seed_id);
    if (it != last.end()) {
      if (order == SelectOrder::kHighest) {
        EXPECT_GT(e.cc_star, it->second);
      } else {
        EXPECT_LT(e.cc_star, it->second);
      }
    }
    last[e.seed_id] = e.cc_star;
  }
  EXPECT_GT(evolutions, 0u);
}

TEST(ContextFuzz, CcStarIsMonotonePerSeedInLog) {
  const Fixture f = random_model_on_blobs(20, 7);
  FuzzConfig cfg = small_config(2000);
  expect_monotone_cc_star(context_fuzz(f.model, f.seeds, cfg).log, SelectOrder::kHighest);
  cfg.select_order = SelectOrder::kLowest;
  expect_monotone_cc_star(context_fuzz(f.model, f.seeds, cfg).log, SelectOrder::kLowest);
}

TEST(ContextFuzz, LogRoundTripsThroughJsonl) {
  const Fixture f = random_model_on_blobs(10, 8);
  const CampaignResult r = context_fuzz(f.model, f.seeds, small_config(200));
  const std::string text = format_campaign_log(r.log);
  EXPECT_EQ(format_campaign_log(parse_campaign_log(text)), text);
  std::size_t translate = 0;
  for (const CampaignEvent& e : r.log) translate += e.phase == "translate";
  EXPECT_EQ(translate, 200u);
}

TEST(ContextFuzz, SingleDirUsesGradientOnly) {
  const Fixture f = random_model_on_blobs(10, 9);
  FuzzConfig cfg = small_config(300);
  cfg.use_seed_equivalence = false;
  std::size_t calls = 0;
  CampaignHooks hooks;
  hooks.on_direction = [&](SeedId, std::span<const double> dir, std::span<const double> grad) {
    ++calls;
    ASSERT_EQ(dir.size(), grad.size());
    for (std::size_t j = 0; j < dir.size(); ++j) ASSERT_EQ(dir[j], grad[j]);
  };
  context_fuzz(f.model, f.seeds, cfg, hooks);
  EXPECT_EQ(calls, 300u);
}

TEST(ContextFuzz, EveryMetricProducesAdversarialPool) {
  const Fixture f = random_model_on_blobs(15, 10);
  for (GuidingMetric metric : {GuidingMetric::kGini, GuidingMetric::kFOL}) {
    FuzzConfig cfg = small_config(500);
    cfg.guiding_metric = metric;
    const CampaignResult r = context_fuzz(f.model, f.seeds, cfg);
    EXPECT_EQ(r.pool.guiding_metric(), to_string(metric));
    for (const TestCase& tc : r.pool.flatten()) EXPECT_NE(f.model.predict_label(tc.data), tc.seed_label);
  }
}

TEST(ContextFuzz, OnBetaModeKeepsPartition) {
  const Fixture f = random_model_on_blobs(15, 11);
  FuzzConfig cfg = small_config(800);
  cfg.eq_update = EqUpdate::kOnBeta;
  const CampaignResult r = context_fuzz(f.model, f.seeds, cfg);
  EXPECT_TRUE(r.index.check_partition());
  for (std::size_t i = 0; i < f.seeds.size(); ++i) EXPECT_EQ(r.index.column_of(i), r.front[i].adversarial_label);
}

TEST(Parsing, EnumRoundTrips) {
  for (auto m : {GuidingMetric::kCC, GuidingMetric::kGini, GuidingMetric::kFOL}) {
    EXPECT_EQ(parse_guiding_metric(to_string(m)), m);
  }
  EXPECT_EQ(parse_select_order("lowest"), SelectOrder::kLowest);
  EXPECT_EQ(parse_eq_update(to_string(EqUpdate::kOnBeta)), EqUpdate::kOnBeta);
  EXPECT_THROW(parse_guiding_metric("nope"), InputError);
}

}  // namespace
}  // namespace clover
