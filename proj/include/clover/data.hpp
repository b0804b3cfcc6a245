#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "clover/rng.hpp"
#include "clover/sample.hpp"

namespace clover {

enum class SyntheticKind { kBlobs, kRings };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kBlobs;
  std::size_t num_classes = 3;
  std::size_t dim = 8;
  std::size_t samples_per_class = 200;
  double spread = 0.08;
  std::uint64_t seed = 0;

  void validate() const;
};

SyntheticKind parse_synthetic_kind(const std::string& text);
std::string to_string(SyntheticKind kind);

// Samples are emitted class by class; every feature is clamped into [0,1].
//   blobs: per-class centre uniform in [0.2,0.8]^d plus isotropic N(0, spread^2)
//   rings: class c on a circle of radius 0.4(c+1)/C around (0.5,0.5) in the
//          first two coordinates, radial and off-plane noise N(0, spread^2)
Dataset generate_synthetic(const SyntheticSpec& spec);

enum class Normalization { kNone, kMinMax };

// CSV with header `f0,...,f{d-1}[,label]`. When `num_classes` is omitted it
// is inferred as max label + 1. Errors carry the 1-based line number.
Dataset load_csv(const std::filesystem::path& path, Normalization normalization,
                 std::optional<std::size_t> num_classes = std::nullopt);
Dataset parse_csv(const std::string& text, Normalization normalization,
                  std::optional<std::size_t> num_classes = std::nullopt, std::string name = "csv");
void save_csv(const Dataset& data, const std::filesystem::path& path);
std::string format_csv(const Dataset& data);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DataSplit {
  Dataset train;
  Dataset val;
  Dataset test;
};

// val and test get floor(n * fraction) samples, train the remainder. Each
// part keeps the original relative order of its samples.
DataSplit split(const Dataset& data, const SplitFractions& fractions, Rng& rng);

Dataset subset(const Dataset& data, std::span<const std::size_t> indices, std::string name);

}  // namespace clover
