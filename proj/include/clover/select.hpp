#pragma once

#include <span>
#include <string>
#include <vector>

#include "clover/fuzzer.hpp"
#include "clover/nn.hpp"
#include "clover/rng.hpp"
#include "clover/test_pool.hpp"

namespace clover {

// Layered selection over cached CC values. Per-seed lists are sorted by CC
// descending; layer i holds the i-th case of every seed (ascending seed id).
// A layer that would overshoot n is sorted by CC (descending, or ascending
// under kLowest) and trimmed.
TestSuite context_select(const TestPool& pool, std::size_t n, SelectOrder order = SelectOrder::kHighest);

// Uniform sample without replacement over the flattened pool.
TestSuite random_select(const TestPool& pool, std::size_t n, Rng& rng);

// Flattened pool ranked by Gini impurity of the prediction, descending.
TestSuite gini_order_select(const TestPool& pool, std::size_t n, const Classifier& model);

// FOL-sorted (descending) pool; first ceil(n/2) and last floor(n/2) cases.
TestSuite be_st(const TestPool& pool, std::size_t n, const Classifier& model, double epsilon);

// FOL-sorted pool cut into k contiguous sections, random picks per section.
TestSuite km_st(const TestPool& pool, std::size_t n, std::size_t k_sections, const Classifier& model, double epsilon,
                Rng& rng);

// Picks min(n, items.size()) indices into `items` uniformly without
// replacement, in draw order.
std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, Rng& rng);

// Section sizes for `total` items in k near-equal contiguous sections, the
// remainder going to the earlier sections.
std::vector<std::size_t> section_sizes(std::size_t total, std::size_t k);
// Per-section pick counts summing to min(n, total).
std::vector<std::size_t> section_quotas(std::span<const std::size_t> sizes, std::size_t n);

struct CcRange {
  double lo = 0.0;
  double hi = 1.0;
};

// [0, 1/s], (1/s, 2/s], ..., ((s-1)/s, 1]
std::vector<CcRange> equal_cc_ranges(std::size_t sections);

// Routes every case to the range (lo, hi] holding its CC; the first range
// also takes its lower bound.
std::vector<TestPool> partition_by_cc(const TestPool& pool, std::span<const CcRange> ranges);

enum class Selector { kContext, kRandom, kGini, kBeSt, kKmSt };
Selector parse_selector(const std::string& text);
std::string to_string(Selector selector);

}  // namespace clover
