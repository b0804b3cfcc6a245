#include <gtest/gtest.h>

#include <cmath>

#include "clover/attack.hpp"
#include "clover/data.hpp"

namespace clover {
namespace {

double linf(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double l2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

struct Trained {
  DataSplit split;
  Mlp model;
};

Trained trained_blobs(double spread) {
  const Dataset data = generate_synthetic(SyntheticSpec{SyntheticKind::kBlobs, 3, 8, 200, spread, 21});
  Rng rng(2);
  DataSplit parts = split(data, {}, rng);
  const std::vector<std::size_t> dims{8, 32, 3};
  Mlp model = train(Mlp::random(dims, rng), parts.train, {}, rng).model;
  return {std::move(parts), std::move(model)};
}

TEST(Step, ZeroDirectionIsNoOp) {
  const AttackConfig cfg;
  const std::vector<double> seed{0.5, 0.5};
  const std::vector<double> current{0.52, 0.49};
  EXPECT_EQ(step(seed, current, std::vector<double>{0.0, 0.0}, 1.0, cfg), current);
}

TEST(Step, SignStepMovesEveryCoordinateByEpsilon) {
  AttackConfig cfg;
  cfg.epsilon = 0.05;
  const std::vector<double> seed{0.5, 0.2, 0.7};
  const auto out = step(seed, seed, std::vector<double>{3.0, 1e-6, 0.2}, 1.0, cfg);
  for (std::size_t i = 0; i < seed.size(); ++i) EXPECT_DOUBLE_EQ(out[i], seed[i] + 0.05);
}

TEST(Step, ClampsToDomain) {
  AttackConfig cfg;
  cfg.epsilon = 0.1;
  const std::vector<double> seed{0.97, 0.02};
  const auto out = step(seed, seed, std::vector<double>{1.0, -1.0}, 1.0, cfg);
  EXPECT_EQ(out[0], 1.0);
  EXPECT_EQ(out[1], 0.0);
}

TEST(Step, RejectsScaleOutsideUnitInterval) {
  const AttackConfig cfg;
  const std::vector<double> x{0.5};
  EXPECT_THROW(step(x, x, x, 0.0, cfg), InputError);
  EXPECT_THROW(step(x, x, x, 1.5, cfg), InputError);
}

TEST(Step, BallAndDomainContainmentFuzz) {
  Rng rng(77);
  for (PNorm norm : {PNorm::kLinf, PNorm::kL2}) {
    for (bool raw : {false, true}) {
      AttackConfig cfg;
      cfg.p_norm = norm;
      cfg.raw_gradient = raw;
      for (int trial = 0; trial < 10000 / 4; ++trial) {
        cfg.epsilon = rng.uniform(0.001, 0.3);
        const std::size_t d = 1 + rng.below(10);
        std::vector<double> seed(d), dir(d);
        for (double& v : seed) v = rng.uniform();
        for (double& v : dir) v = rng.uniform(-50, 50);
        std::vector<double> current = random_start(seed, cfg, rng);
        for (int k = 0; k < 3; ++k) current = step(seed, current, dir, rng.uniform(0.01, 1.0), cfg);
        const double dist = norm == PNorm::kLinf ? linf(current, seed) : l2(current, seed);
        ASSERT_LE(dist, cfg.epsilon + 1e-12);
        for (double v : current) {
          ASSERT_GE(v, 0.0);
          ASSERT_LE(v, 1.0);
        }
      }
    }
  }
}

TEST(Step, L2NormalizesToUnitLength) {
  AttackConfig cfg;
  cfg.p_norm = PNorm::kL2;
  cfg.epsilon = 0.1;
  const std::vector<double> seed{0.5, 0.5};
  const auto out = step(seed, seed, std::vector<double>{3.0, 4.0}, 0.5, cfg);
  EXPECT_NEAR(out[0], 0.5 + 0.05 * 0.6, 1e-15);
  EXPECT_NEAR(out[1], 0.5 + 0.05 * 0.8, 1e-15);
}

TEST(Fgsm, ZeroGradientReturnsSeed) {
  const std::vector<std::size_t> dims{3, 2};
  const Mlp model = Mlp::zeros(dims);
  const std::vector<double> x{0.1, 0.5, 0.9};
  EXPECT_EQ(fgsm(model, x, 0, AttackConfig{}), x);
}

TEST(Fgsm, StaysWithinEpsilonAndIncreasesLoss) {
  const Trained t = trained_blobs(0.12);
  AttackConfig cfg;
  cfg.epsilon = 0.05;
  cfg.fgsm_step = 0.05;
  std::size_t increased = 0;
  for (const Sample& s : t.split.test.samples) {
    const auto a = fgsm(t.model, s.features, *s.label, cfg);
    EXPECT_LE(linf(a, s.features), 0.05 + 1e-12);
    if (t.model.loss(a, *s.label) >= t.model.loss(s.features, *s.label)) ++increased;
  }
  EXPECT_GE(static_cast<double>(increased), 0.9 * static_cast<double>(t.split.test.size()));
}

TEST(Pgd, SingleFullStepEqualsFgsm) {
  Rng rng(8);
  const std::vector<std::size_t> dims{5, 7, 3};
  const Mlp model = Mlp::random(dims, rng);
  AttackConfig cfg;
  cfg.epsilon = 0.07;
  cfg.fgsm_step = 0.07;
  cfg.pgd_step = 0.07;
  cfg.pgd_iters = 1;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(5);
    for (double& v : x) v = rng.uniform();
    EXPECT_EQ(pgd(model, x, 1, cfg), fgsm(model, x, 1, cfg));
  }
}

TEST(Pgd, AtLeastAsStrongAsFgsm) {
  const Trained t = trained_blobs(0.2);
  AttackConfig cfg;
  cfg.epsilon = 0.1;
  cfg.fgsm_step = 0.1;
  cfg.pgd_step = 0.1 / 6.0;
  cfg.pgd_iters = 10;
  std::size_t fgsm_hits = 0;
  std::size_t pgd_hits = 0;
  for (const Sample& s : t.split.test.samples) {
    if (is_adversarial(t.model, fgsm(t.model, s.features, *s.label, cfg), *s.label)) ++fgsm_hits;
    const auto p = pgd(t.model, s.features, *s.label, cfg);
    EXPECT_LE(linf(p, s.features), 0.1 + 1e-12);
    if (is_adversarial(t.model, p, *s.label)) ++pgd_hits;
  }
  EXPECT_GT(fgsm_hits, 0u);
  EXPECT_GE(pgd_hits, fgsm_hits);
}

TEST(Universe, RandomModelYieldsAdversarialEntries) {
  const Dataset data = generate_synthetic(SyntheticSpec{SyntheticKind::kBlobs, 3, 8, 50, 0.1, 4});
  Rng rng(31);
  const std::vector<std::size_t> dims{8, 16, 3};
  const Mlp model = Mlp::random(dims, rng);
  AttackConfig cfg;
  cfg.epsilon = 0.05;
  const UniverseResult universe = build_universe(model, data, cfg, 100, rng);
  EXPECT_FALSE(universe.pool.empty());
  EXPECT_TRUE(universe.warnings.empty());
  for (const TestCase& tc : universe.pool.flatten()) {
    EXPECT_NE(model.predict_label(tc.data), tc.seed_label);
    EXPECT_EQ(model.predict_label(tc.data), tc.adversarial_label);
    EXPECT_EQ(tc.seed_label, *data.samples[tc.seed_id].label);
    EXPECT_LE(linf(tc.data, data.samples[tc.seed_id].features), 0.05 + 1e-12);
  }
}

TEST(Universe, ZeroCountIsEmpty) {
  const Dataset data = generate_synthetic(SyntheticSpec{SyntheticKind::kBlobs, 2, 2, 5, 0.1, 4});
  Rng rng(1);
  const std::vector<std::size_t> dims{2, 2};
  EXPECT_TRUE(build_universe(Mlp::zeros(dims), data, {}, 0, rng).pool.empty());
}

TEST(Universe, RobustModelWarns) {
  // A zero model predicts class 0 everywhere with zero gradient: nothing flips.
  Dataset data = generate_synthetic(SyntheticSpec{SyntheticKind::kBlobs, 2, 2, 5, 0.1, 4});
  for (Sample& s : data.samples) s.label = 0;
  Rng rng(1);
  const std::vector<std::size_t> dims{2, 2};
  const UniverseResult universe = build_universe(Mlp::zeros(dims), data, {}, 20, rng);
  EXPECT_TRUE(universe.pool.empty());
  EXPECT_EQ(universe.warnings.size(), 1u);
}

}  // namespace
}  // namespace clover
