#include "clover/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace clover {

void AttackConfig::validate() const {
  if (!(epsilon > 0.0)) throw InputError("attack: epsilon must be positive");
  if (!(fgsm_step > 0.0)) throw InputError("attack: fgsm_step must be positive");
  if (!(pgd_step > 0.0)) throw InputError("attack: pgd_step must be positive");
  if (pgd_iters == 0) throw InputError("attack: pgd_iters must be >= 1");
}

namespace {

void check_dims(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InputError("attack: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace

std::vector<double> normalize_direction(std::span<const double> direction, const AttackConfig& cfg) {
  std::vector<double> out(direction.begin(), direction.end());
  if (cfg.raw_gradient) return out;
  if (cfg.p_norm == PNorm::kLinf) {
    for (double& v : out) v = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  } else {
    const double norm = l2_norm(out);
    if (norm > 0.0) {
      for (double& v : out) v /= norm;
    }
  }
  return out;
}

void project(std::span<const double> seed, std::span<double> point, const AttackConfig& cfg) {
  check_dims(seed, point);
  if (cfg.p_norm == PNorm::kLinf) {
    for (std::size_t i = 0; i < point.size(); ++i) {
      point[i] = std::clamp(point[i], seed[i] - cfg.epsilon, seed[i] + cfg.epsilon);
    }
  } else {
    double sum = 0.0;
    for (std::size_t i = 0; i < point.size(); ++i) sum += (point[i] - seed[i]) * (point[i] - seed[i]);
    const double dist = std::sqrt(sum);
    if (dist > cfg.epsilon) {
      const double shrink = cfg.epsilon / dist;
      for (std::size_t i = 0; i < point.size(); ++i) point[i] = seed[i] + (point[i] - seed[i]) * shrink;
    }
  }
  // Clamping moves every coordinate towards the seed (which is in [0,1]), so
  // the point stays inside the ball under either norm.
  for (double& v : point) v = std::clamp(v, 0.0, 1.0);
}

std::vector<double> step_by(std::span<const double> seed, std::span<const double> current,
                            std::span<const double> direction, double length, const AttackConfig& cfg) {
  check_dims(seed, current);
  check_dims(seed, direction);
  std::vector<double> out(current.begin(), current.end());
  if (std::all_of(direction.begin(), direction.end(), [](double v) { return v == 0.0; })) return out;
  const std::vector<double> unit = normalize_direction(direction, cfg);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += length * unit[i];
  project(seed, out, cfg);
  return out;
}

std::vector<double> step(std::span<const double> seed, std::span<const double> current,
                         std::span<const double> direction, double scale, const AttackConfig& cfg) {
  if (!(scale > 0.0 && scale <= 1.0)) throw InputError("step: scale must lie in (0, 1]");
  return step_by(seed, current, direction, scale * cfg.epsilon, cfg);
}

bool is_adversarial(const Classifier& model, std::span<const double> x, ClassId seed_label) {
  return model.predict_label(x) != seed_label;
}

std::vector<double> fgsm(const Classifier& model, std::span<const double> x0, ClassId label,
                         const AttackConfig& cfg) {
  const std::vector<double> grad = model.loss_gradient(x0, label);
  return step_by(x0, x0, grad, cfg.fgsm_step, cfg);
}

std::vector<double> pgd(const Classifier& model, std::span<const double> x0, ClassId label,
                        const AttackConfig& cfg, std::span<const double> start) {
  std::vector<double> x = start.empty() ? std::vector<double>(x0.begin(), x0.end())
                                        : std::vector<double>(start.begin(), start.end());
  check_dims(x0, x);
  for (std::size_t it = 0; it < cfg.pgd_iters; ++it) {
    const std::vector<double> grad = model.loss_gradient(x, label);
    x = step_by(x0, x, grad, cfg.pgd_step, cfg);
  }
  return x;
}

std::vector<double> random_start(std::span<const double> x0, const AttackConfig& cfg, Rng& rng) {
  std::vector<double> x(x0.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = x0[i] + rng.uniform(-cfg.epsilon, cfg.epsilon);
  project(x0, x, cfg);
  return x;
}

UniverseResult build_universe(const Classifier& model, const Dataset& data, const AttackConfig& cfg,
                              std::size_t per_attacker_count, Rng& rng) {
  cfg.validate();
  if (!data.fully_labeled()) throw InputError("build_universe: dataset must be labeled");
  UniverseResult result{TestPool("CC"), {}};
  if (per_attacker_count == 0 || data.empty()) return result;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));

  const auto keep = [&](std::vector<double> x, std::size_t seed) {
    const ClassId label = *data.samples[seed].label;
    const ClassId predicted = model.predict_label(x);
    if (predicted == label) return;
    result.pool.add(TestCase{std::move(x), seed, label, predicted, std::nullopt, 0.0});
  };

  for (std::size_t attempt = 0; attempt < per_attacker_count; ++attempt) {
    const std::size_t seed = order[attempt % order.size()];
    const auto& x0 = data.samples[seed].features;
    const ClassId label = *data.samples[seed].label;
    if (attempt < order.size()) {
      keep(fgsm(model, x0, label, cfg), seed);
      keep(pgd(model, x0, label, cfg), seed);
    } else {
      const std::vector<double> fgsm_start = random_start(x0, cfg, rng);
      const std::vector<double> grad = model.loss_gradient(fgsm_start, label);
      keep(step_by(x0, fgsm_start, grad, cfg.fgsm_step, cfg), seed);
      const std::vector<double> pgd_start = random_start(x0, cfg, rng);
      keep(pgd(model, x0, label, cfg, pgd_start), seed);
    }
  }
  if (result.pool.empty()) result.warnings.push_back("no perturbed sample was misclassified; universe is empty");
  return result;
}

}  // namespace clover
