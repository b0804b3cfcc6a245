#pragma once

#include <span>
#include <string>
#include <vector>

#include "clover/data.hpp"
#include "clover/nn.hpp"
#include "clover/rng.hpp"
#include "clover/test_pool.hpp"

namespace clover {

struct AttackConfig {
  double epsilon = 0.05;
  PNorm p_norm = PNorm::kLinf;
  double fgsm_step = 0.05;
  double pgd_step = 0.05 / 6.0;
  std::size_t pgd_iters = 10;
  // Move along the unnormalized direction instead of its sign / unit vector.
  bool raw_gradient = false;

  void validate() const;
};

// Sign vector under Linf, unit vector under L2, identity when raw.
// A zero direction stays zero.
std::vector<double> normalize_direction(std::span<const double> direction, const AttackConfig& cfg);

// Projects `point` into the epsilon-ball around `seed`, then clamps to [0,1].
void project(std::span<const double> seed, std::span<double> point, const AttackConfig& cfg);

// current + scale * epsilon * normalize(direction), projected and clamped.
// scale must lie in (0, 1].
std::vector<double> step(std::span<const double> seed, std::span<const double> current,
                         std::span<const double> direction, double scale, const AttackConfig& cfg);

// Same as step() with an absolute step length instead of a fraction of epsilon.
std::vector<double> step_by(std::span<const double> seed, std::span<const double> current,
                            std::span<const double> direction, double length, const AttackConfig& cfg);

bool is_adversarial(const Classifier& model, std::span<const double> x, ClassId seed_label);

std::vector<double> fgsm(const Classifier& model, std::span<const double> x0, ClassId label,
                         const AttackConfig& cfg);
// Starts from `start` (x0 when omitted); every iterate stays in the ball of x0.
std::vector<double> pgd(const Classifier& model, std::span<const double> x0, ClassId label,
                        const AttackConfig& cfg, std::span<const double> start = {});

// Uniform point of the epsilon-box around x0, projected into the ball.
std::vector<double> random_start(std::span<const double> x0, const AttackConfig& cfg, Rng& rng);

struct UniverseResult {
  TestPool pool;
  std::vector<std::string> warnings;
};

// Runs `per_attacker_count` FGSM and as many PGD attempts. Seeds are visited
// in a shuffled cycle; the first visit of a seed attacks from the seed itself,
// later visits from a random start inside its ball. Only adversarial outputs
// are kept.
UniverseResult build_universe(const Classifier& model, const Dataset& data, const AttackConfig& cfg,
                              std::size_t per_attacker_count, Rng& rng);

}  // namespace clover
