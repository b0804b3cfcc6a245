#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "clover/nn.hpp"
#include "clover/test_pool.hpp"

namespace clover::testing {

// Returns the same probability vector for every input.
class ConstantModel final : public Classifier {
 public:
  explicit ConstantModel(std::vector<double> probs) : probs_(std::move(probs)) {}
  std::size_t input_dim() const override { return dim_; }
  std::size_t num_classes() const override { return probs_.size(); }
  std::vector<double> predict(std::span<const double>) const override { return probs_; }
  std::vector<double> loss_gradient(std::span<const double> x, ClassId) const override {
    return std::vector<double>(x.size(), 0.0);
  }
  void set_dim(std::size_t d) { dim_ = d; }

 private:
  std::vector<double> probs_;
  std::size_t dim_ = 1;
};

// Looks up the probability vector of the nearest registered point.
class LookupModel final : public Classifier {
 public:
  LookupModel(std::size_t dim, std::size_t classes) : dim_(dim), classes_(classes) {}
  void add(std::vector<double> point, std::vector<double> probs) {
    points_.push_back(std::move(point));
    probs_.push_back(std::move(probs));
  }
  std::size_t input_dim() const override { return dim_; }
  std::size_t num_classes() const override { return classes_; }
  std::vector<double> predict(std::span<const double> x) const override;
  std::vector<double> loss_gradient(std::span<const double> x, ClassId) const override {
    return std::vector<double>(x.size(), 0.0);
  }

 private:
  std::size_t dim_;
  std::size_t classes_;
  std::vector<std::vector<double>> points_;
  std::vector<std::vector<double>> probs_;
};

// Central differences of the loss, written independently of the library.
std::vector<double> finite_difference_gradient(const Classifier& model, std::span<const double> x, ClassId label,
                                               double h);

// Plain Monte-Carlo estimate of the contextual confidence with its own
// generator; returns {mean, standard error}.
std::pair<double, double> monte_carlo_cc(const Classifier& model, std::span<const double> x, ClassId v, double delta,
                                         std::size_t draws, std::uint32_t seed);

// Random pool with CC values in [0,1]; some exact ties are injected.
TestPool random_pool(std::size_t max_cases, std::size_t max_seeds, std::size_t dim, std::uint32_t seed);

// Reference selectors built from whole-list sorts.
std::vector<TestCase> reference_context_select(const TestPool& pool, std::size_t n, bool lowest_trim = false);
std::vector<TestCase> reference_rank_select(const std::vector<TestCase>& flat, const std::vector<double>& scores,
                                            std::size_t n);
std::vector<TestCase> reference_be_st(const std::vector<TestCase>& flat, const std::vector<double>& scores,
                                      std::size_t n);
// Section index of every position of a sorted list of `total` items.
std::vector<std::size_t> reference_sections(std::size_t total, std::size_t k);

}  // namespace clover::testing
