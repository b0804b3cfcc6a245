#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clover/types.hpp"

namespace clover {

// A point in the unit hypercube, optionally carrying its ground-truth class.
struct Sample {
  std::vector<double> features;
  std::optional<ClassId> label;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::string name;
  std::size_t num_classes = 0;
  std::size_t dim = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  bool fully_labeled() const;

  // Throws InputError if any sample breaks the shared-dimension, [0,1]
  // or label < num_classes invariants.
  void validate() const;
};

}  // namespace clover
