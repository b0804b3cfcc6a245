#pragma once

#include <span>
#include <string>
#include <vector>

#include "clover/nn.hpp"
#include "clover/rng.hpp"
#include "clover/test_pool.hpp"

namespace clover {

struct CCParams {
  std::size_t k = 20;
  double delta = 0.01;

  // delta must be positive and, when epsilon > 0 is given, below it.
  void validate(double epsilon = 0.0) const;
};

// A frozen set of k perturbations, each coordinate uniform in [-delta, delta].
class ContextNoise {
 public:
  ContextNoise(std::size_t k, std::size_t dim, std::vector<double> values);
  static ContextNoise draw(const CCParams& params, std::size_t dim, Rng& rng);

  std::size_t k() const { return k_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

 private:
  std::size_t k_;
  std::size_t dim_;
  std::vector<double> values_;
};

// Mean probability of label v over the clamped neighbours x + noise_i.
double contextual_confidence(const Classifier& model, std::span<const double> x, ClassId v,
                             const ContextNoise& noise);
// Same with a fresh noise draw.
double contextual_confidence(const Classifier& model, std::span<const double> x, ClassId v,
                             const CCParams& params, Rng& rng);

double gini(std::span<const double> probs);

// epsilon * ||d/dx loss(x, label)||_2
double fol(const Classifier& model, std::span<const double> x, ClassId label, double epsilon);

struct SuiteStats {
  std::size_t adv_label_count = 0;
  std::size_t category_count = 0;
  double mean_cc = 0.0;

  bool operator==(const SuiteStats&) const = default;
};

struct SuiteStatsResult {
  SuiteStats stats;
  std::vector<std::string> warnings;
};

// Every case must carry a cached cc value.
SuiteStatsResult suite_stats(std::span<const TestCase> suite);

// Fraction of entries predicted as their seed label. Throws on an empty universe.
double robust_accuracy(const Classifier& model, std::span<const TestCase> universe);

// CC of every case (for its adversarial label) under both models, each list
// sorted ascending, mean of the positionwise differences before - after.
double mean_cc_reduction(std::span<const TestCase> suite, const Classifier& before, const Classifier& after,
                         const ContextNoise& noise);

// Fills in every missing cc value of the pool.
void annotate_cc(const Classifier& model, TestPool& pool, const ContextNoise& noise);

}  // namespace clover
