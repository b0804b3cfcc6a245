#include "clover/select.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "clover/metrics.hpp"

namespace clover {

namespace {

double cc_of(const TestCase& tc) {
  if (!tc.cc) throw InputError("context_select: test case without a cc value");
  return *tc.cc;
}

void finish(TestSuite& suite, const TestPool& pool, std::size_t n) {
  if (n == 0) throw InputError("selection: n must be >= 1");
  if (pool.size() < n) {
    suite.warnings.push_back("pool holds " + std::to_string(pool.size()) + " cases, fewer than n = " +
                             std::to_string(n));
  }
}

struct Scored {
  const TestCase* tc;
  double score;
};

std::vector<Scored> sorted_by(const TestPool& pool, const std::function<double(const TestCase&)>& score) {
  std::vector<Scored> items;
  items.reserve(pool.size());
  for (const auto& [seed, list] : pool.by_seed()) {
    for (const TestCase& tc : list) items.push_back(Scored{&tc, score(tc)});
  }
  std::stable_sort(items.begin(), items.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
  return items;
}

}  // namespace

TestSuite context_select(const TestPool& pool, std::size_t n, SelectOrder order) {
  TestSuite suite;
  suite.provenance = {"context_select", {{"n", n}, {"order", to_string(order)}}};
  finish(suite, pool, n);

  std::vector<std::vector<const TestCase*>> lists;
  std::size_t depth = 0;
  for (const auto& [seed, list] : pool.by_seed()) {
    std::vector<const TestCase*> sorted;
    for (const TestCase& tc : list) {
      cc_of(tc);
      sorted.push_back(&tc);
    }
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const TestCase* a, const TestCase* b) { return cc_of(*a) > cc_of(*b); });
    depth = std::max(depth, sorted.size());
    lists.push_back(std::move(sorted));
  }

  for (std::size_t i = 0; i < depth && suite.cases.size() < n; ++i) {
    std::vector<const TestCase*> layer;
    for (const auto& list : lists) {
      if (i < list.size()) layer.push_back(list[i]);
    }
    const std::size_t room = n - suite.cases.size();
    if (layer.size() > room) {
      if (order == SelectOrder::kHighest) {
        std::stable_sort(layer.begin(), layer.end(),
                         [](const TestCase* a, const TestCase* b) { return cc_of(*a) > cc_of(*b); });
      } else {
        std::stable_sort(layer.begin(), layer.end(),
                         [](const TestCase* a, const TestCase* b) { return cc_of(*a) < cc_of(*b); });
      }
      layer.resize(room);
    }
    for (const TestCase* tc : layer) suite.cases.push_back(*tc);
  }
  return suite;
}

std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(size);
  for (std::size_t i = 0; i < size; ++i) order[i] = i;
  const std::size_t take = std::min(n, size);
  // Partial Fisher-Yates from the front.
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(size - i));
    std::swap(order[i], order[j]);
  }
  order.resize(take);
  return order;
}

TestSuite random_select(const TestPool& pool, std::size_t n, Rng& rng) {
  TestSuite suite;
  suite.provenance = {"random", {{"n", n}, {"seed", rng.seed()}}};
  finish(suite, pool, n);
  const std::vector<TestCase> all = pool.flatten();
  for (std::size_t i : sample_indices(all.size(), n, rng)) suite.cases.push_back(all[i]);
  return suite;
}

TestSuite gini_order_select(const TestPool& pool, std::size_t n, const Classifier& model) {
  TestSuite suite;
  suite.provenance = {"gini", {{"n", n}}};
  finish(suite, pool, n);
  const auto items = sorted_by(pool, [&](const TestCase& tc) { return gini(model.predict(tc.data)); });
  for (std::size_t i = 0; i < std::min(n, items.size()); ++i) suite.cases.push_back(*items[i].tc);
  return suite;
}

TestSuite be_st(const TestPool& pool, std::size_t n, const Classifier& model, double epsilon) {
  TestSuite suite;
  suite.provenance = {"be_st", {{"n", n}, {"epsilon", epsilon}}};
  finish(suite, pool, n);
  const auto items = sorted_by(pool, [&](const TestCase& tc) { return fol(model, tc.data, tc.seed_label, epsilon); });
  if (items.size() <= n) {
    for (const Scored& s : items) suite.cases.push_back(*s.tc);
    return suite;
  }
  const std::size_t top = (n + 1) / 2;
  const std::size_t bottom = n / 2;
  for (std::size_t i = 0; i < top; ++i) suite.cases.push_back(*items[i].tc);
  for (std::size_t i = items.size() - bottom; i < items.size(); ++i) suite.cases.push_back(*items[i].tc);
  return suite;
}

std::vector<std::size_t> section_sizes(std::size_t total, std::size_t k) {
  if (k == 0) throw InputError("km_st: k_sections must be >= 1");
  std::vector<std::size_t> sizes(k, total / k);
  for (std::size_t s = 0; s < total % k; ++s) ++sizes[s];
  return sizes;
}

std::vector<std::size_t> section_quotas(std::span<const std::size_t> sizes, std::size_t n) {
  const std::size_t k = sizes.size();
  std::size_t total = 0;
  for (std::size_t s : sizes) total += s;
  n = std::min(n, total);
  std::vector<std::size_t> quota(k, n / k);
  for (std::size_t s = 0; s < n % k; ++s) ++quota[s];
  for (std::size_t s = 0; s < k; ++s) {
    if (quota[s] <= sizes[s]) continue;
    std::size_t deficit = quota[s] - sizes[s];
    quota[s] = sizes[s];
    for (std::size_t t = (s + 1) % k; deficit > 0; t = (t + 1) % k) {
      if (quota[t] < sizes[t]) {
        ++quota[t];
        --deficit;
      }
    }
  }
  return quota;
}

TestSuite km_st(const TestPool& pool, std::size_t n, std::size_t k_sections, const Classifier& model, double epsilon,
                Rng& rng) {
  TestSuite suite;
  suite.provenance = {"km_st", {{"n", n}, {"k_sections", k_sections}, {"epsilon", epsilon}, {"seed", rng.seed()}}};
  finish(suite, pool, n);
  const auto items = sorted_by(pool, [&](const TestCase& tc) { return fol(model, tc.data, tc.seed_label, epsilon); });
  const auto sizes = section_sizes(items.size(), k_sections);
  const auto quota = section_quotas(sizes, n);
  std::size_t begin = 0;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    for (std::size_t i : sample_indices(sizes[s], quota[s], rng)) suite.cases.push_back(*items[begin + i].tc);
    begin += sizes[s];
  }
  return suite;
}

std::vector<CcRange> equal_cc_ranges(std::size_t sections) {
  if (sections == 0) throw InputError("equal_cc_ranges: sections must be >= 1");
  std::vector<CcRange> ranges;
  for (std::size_t s = 0; s < sections; ++s) {
    ranges.push_back(CcRange{static_cast<double>(s) / static_cast<double>(sections),
                             static_cast<double>(s + 1) / static_cast<double>(sections)});
  }
  ranges.back().hi = 1.0;
  return ranges;
}

std::vector<TestPool> partition_by_cc(const TestPool& pool, std::span<const CcRange> ranges) {
  if (ranges.empty()) throw InputError("partition_by_cc: no ranges");
  if (ranges.front().lo > 0.0 || ranges.back().hi < 1.0) throw InputError("partition_by_cc: ranges must cover [0,1]");
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (!(ranges[i].lo < ranges[i].hi)) throw InputError("partition_by_cc: empty range");
    if (i > 0 && ranges[i].lo != ranges[i - 1].hi) throw InputError("partition_by_cc: ranges must be contiguous");
  }
  std::vector<TestPool> parts(ranges.size(), TestPool(pool.guiding_metric()));
  for (const auto& [seed, list] : pool.by_seed()) {
    for (const TestCase& tc : list) {
      const double cc = cc_of(tc);
      std::size_t target = ranges.size();
      for (std::size_t i = 0; i < ranges.size(); ++i) {
        if ((cc > ranges[i].lo || (i == 0 && cc >= ranges[i].lo)) && cc <= ranges[i].hi) {
          target = i;
          break;
        }
      }
      if (target == ranges.size()) throw InputError("partition_by_cc: cc value outside every range");
      parts[target].add(tc);
    }
  }
  return parts;
}

Selector parse_selector(const std::string& text) {
  if (text == "context" || text == "context_select" || text == "clover") return Selector::kContext;
  if (text == "random") return Selector::kRandom;
  if (text == "gini") return Selector::kGini;
  if (text == "be_st" || text == "be-st") return Selector::kBeSt;
  if (text == "km_st" || text == "km-st") return Selector::kKmSt;
  throw InputError("unknown selector '" + text + "' (expected context, random, gini, be_st or km_st)");
}

std::string to_string(Selector selector) {
  switch (selector) {
    case Selector::kContext: return "context";
    case Selector::kRandom: return "random";
    case Selector::kGini: return "gini";
    case Selector::kBeSt: return "be_st";
    case Selector::kKmSt: return "km_st";
  }
  return "context";
}

}  // namespace clover
