#include "clover/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace clover {

void CCParams::validate(double epsilon) const {
  if (k == 0) throw InputError("cc: k must be >= 1");
  if (!(delta > 0.0)) throw InputError("cc: delta must be positive");
  if (epsilon > 0.0 && !(delta < epsilon)) throw InputError("cc: delta must be smaller than epsilon");
}

ContextNoise::ContextNoise(std::size_t k, std::size_t dim, std::vector<double> values)
    : k_(k), dim_(dim), values_(std::move(values)) {
  if (k_ == 0) throw InputError("context noise: k must be >= 1");
  if (values_.size() != k_ * dim_) throw InputError("context noise: expected k * dim values");
}

ContextNoise ContextNoise::draw(const CCParams& params, std::size_t dim, Rng& rng) {
  params.validate();
  std::vector<double> values(params.k * dim);
  for (double& v : values) v = rng.uniform(-params.delta, params.delta);
  return ContextNoise(params.k, dim, std::move(values));
}

double contextual_confidence(const Classifier& model, std::span<const double> x, ClassId v,
                             const ContextNoise& noise) {
  if (v < 0 || static_cast<std::size_t>(v) >= model.num_classes()) throw InputError("cc: label out of range");
  if (x.size() != noise.dim()) throw InputError("cc: noise dimension does not match the input");
  std::vector<double> neighbour(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < noise.k(); ++i) {
    const auto omega = noise.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) neighbour[j] = std::clamp(x[j] + omega[j], 0.0, 1.0);
    sum += model.predict(neighbour)[static_cast<std::size_t>(v)];
  }
  return std::clamp(sum / static_cast<double>(noise.k()), 0.0, 1.0);
}

double contextual_confidence(const Classifier& model, std::span<const double> x, ClassId v,
                             const CCParams& params, Rng& rng) {
  return contextual_confidence(model, x, v, ContextNoise::draw(params, x.size(), rng));
}

double gini(std::span<const double> probs) {
  double sum = 0.0;
  for (double p : probs) sum += p * p;
  return 1.0 - sum;
}

double fol(const Classifier& model, std::span<const double> x, ClassId label, double epsilon) {
  const std::vector<double> grad = model.loss_gradient(x, label);
  double sum = 0.0;
  for (double g : grad) sum += g * g;
  return epsilon * std::sqrt(sum);
}

SuiteStatsResult suite_stats(std::span<const TestCase> suite) {
  SuiteStatsResult result;
  if (suite.empty()) {
    result.warnings.push_back("empty suite; statistics are zero");
    return result;
  }
  std::set<std::pair<SeedId, ClassId>> pairs;
  std::set<SeedId> seeds;
  double cc_sum = 0.0;
  for (const TestCase& tc : suite) {
    if (!tc.cc) throw InputError("suite_stats: test case without a cc value");
    pairs.emplace(tc.seed_id, tc.adversarial_label);
    seeds.insert(tc.seed_id);
    cc_sum += *tc.cc;
  }
  result.stats = SuiteStats{pairs.size(), seeds.size(), cc_sum / static_cast<double>(suite.size())};
  return result;
}

double robust_accuracy(const Classifier& model, std::span<const TestCase> universe) {
  if (universe.empty()) throw InputError("robust_accuracy: empty universe");
  std::size_t correct = 0;
  for (const TestCase& tc : universe) {
    if (model.predict_label(tc.data) == tc.seed_label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(universe.size());
}

double mean_cc_reduction(std::span<const TestCase> suite, const Classifier& before, const Classifier& after,
                         const ContextNoise& noise) {
  if (suite.empty()) throw InputError("mean_cc_reduction: empty suite");
  std::vector<double> cc_before;
  std::vector<double> cc_after;
  cc_before.reserve(suite.size());
  cc_after.reserve(suite.size());
  for (const TestCase& tc : suite) {
    cc_before.push_back(contextual_confidence(before, tc.data, tc.adversarial_label, noise));
    cc_after.push_back(contextual_confidence(after, tc.data, tc.adversarial_label, noise));
  }
  std::sort(cc_before.begin(), cc_before.end());
  std::sort(cc_after.begin(), cc_after.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < suite.size(); ++i) sum += cc_before[i] - cc_after[i];
  return sum / static_cast<double>(suite.size());
}

void annotate_cc(const Classifier& model, TestPool& pool, const ContextNoise& noise) {
  for (auto& [seed, list] : pool.mutable_by_seed()) {
    for (TestCase& tc : list) {
      if (!tc.cc) tc.cc = contextual_confidence(model, tc.data, tc.adversarial_label, noise);
    }
  }
}

}  // namespace clover
