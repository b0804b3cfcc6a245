#include "clover/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace clover {

bool Dataset::fully_labeled() const {
  return std::all_of(samples.begin(), samples.end(), [](const Sample& s) { return s.label.has_value(); });
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.features.size() != dim) {
      throw InputError("sample " + std::to_string(i) + " has dimension " + std::to_string(s.features.size()) +
                       ", dataset declares " + std::to_string(dim));
    }
    for (double v : s.features) {
      if (!(v >= 0.0 && v <= 1.0)) throw InputError("sample " + std::to_string(i) + " leaves [0,1]");
    }
    if (s.label && (*s.label < 0 || static_cast<std::size_t>(*s.label) >= num_classes)) {
      throw InputError("sample " + std::to_string(i) + " label out of range");
    }
  }
}

void SyntheticSpec::validate() const {
  if (num_classes == 0) throw InputError("synthetic spec: num_classes must be >= 1");
  if (dim == 0) throw InputError("synthetic spec: dim must be >= 1");
  if (samples_per_class == 0) throw InputError("synthetic spec: samples_per_class must be >= 1");
  if (!(spread > 0.0)) throw InputError("synthetic spec: spread must be positive");
  if (kind == SyntheticKind::kRings && dim < 2) throw InputError("synthetic spec: rings need dim >= 2");
}

SyntheticKind parse_synthetic_kind(const std::string& text) {
  if (text == "blobs") return SyntheticKind::kBlobs;
  if (text == "rings") return SyntheticKind::kRings;
  throw InputError("unknown synthetic kind '" + text + "' (expected blobs or rings)");
}

std::string to_string(SyntheticKind kind) { return kind == SyntheticKind::kBlobs ? "blobs" : "rings"; }

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset data{to_string(spec.kind), spec.num_classes, spec.dim, {}};
  data.samples.reserve(spec.num_classes * spec.samples_per_class);
  const auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };

  std::vector<std::vector<double>> centres;
  if (spec.kind == SyntheticKind::kBlobs) {
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
      std::vector<double> centre(spec.dim);
      for (double& v : centre) v = rng.uniform(0.2, 0.8);
      centres.push_back(std::move(centre));
    }
  }

  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      std::vector<double> x(spec.dim);
      if (spec.kind == SyntheticKind::kBlobs) {
        for (std::size_t j = 0; j < spec.dim; ++j) x[j] = clamp01(centres[c][j] + spec.spread * rng.normal());
      } else {
        const double radius = 0.4 * static_cast<double>(c + 1) / static_cast<double>(spec.num_classes) +
                              spec.spread * rng.normal();
        const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        x[0] = clamp01(0.5 + radius * std::cos(angle));
        x[1] = clamp01(0.5 + radius * std::sin(angle));
        for (std::size_t j = 2; j < spec.dim; ++j) x[j] = clamp01(0.5 + spec.spread * rng.normal());
      }
      data.samples.push_back(Sample{std::move(x), static_cast<ClassId>(c)});
    }
  }
  return data;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return fields;
}

double parse_number(std::string_view cell, std::size_t line) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
    throw ParseError("non-numeric cell '" + std::string(cell) + "'", line);
  }
  return value;
}

ClassId parse_label(std::string_view cell, std::size_t line) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || value < 0) {
    throw ParseError("label '" + std::string(cell) + "' is not a non-negative integer", line);
  }
  return static_cast<ClassId>(value);
}

}  // namespace

Dataset parse_csv(const std::string& text, Normalization normalization,
                  std::optional<std::size_t> num_classes, std::string name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool has_label = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (line_no == 0 || line.find_first_not_of(" \t\r") == std::string::npos) {
    throw ParseError("missing header row", line_no);
  }
  {
    const auto header = split_fields(line);
    has_label = header.back() == "label";
    dim = header.size() - (has_label ? 1 : 0);
    if (dim == 0) throw ParseError("header declares no feature columns", line_no);
  }

  Dataset data{std::move(name), 0, dim, {}};
  std::vector<std::size_t> row_lines;
  ClassId max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    const std::size_t expected = dim + (has_label ? 1 : 0);
    if (fields.size() != expected) {
      throw ParseError("expected " + std::to_string(expected) + " fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    Sample s;
    s.features.reserve(dim);
    for (std::size_t j = 0; j < dim; ++j) s.features.push_back(parse_number(fields[j], line_no));
    if (has_label && !fields[dim].empty()) {
      const ClassId label = parse_label(fields[dim], line_no);
      if (num_classes && static_cast<std::size_t>(label) >= *num_classes) {
        throw ParseError("label " + std::to_string(label) + " >= number of classes " + std::to_string(*num_classes),
                         line_no);
      }
      max_label = std::max(max_label, label);
      s.label = label;
    }
    data.samples.push_back(std::move(s));
    row_lines.push_back(line_no);
  }
  data.num_classes = num_classes ? *num_classes : static_cast<std::size_t>(max_label + 1);

  if (normalization == Normalization::kMinMax) {
    for (std::size_t j = 0; j < dim; ++j) {
      double lo = INFINITY;
      double hi = -INFINITY;
      for (const Sample& s : data.samples) {
        lo = std::min(lo, s.features[j]);
        hi = std::max(hi, s.features[j]);
      }
      for (Sample& s : data.samples) {
        s.features[j] = hi > lo ? (s.features[j] - lo) / (hi - lo) : 0.0;
      }
    }
  } else {
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      for (double v : data.samples[i].features) {
        if (v < 0.0 || v > 1.0) {
          throw ParseError("value outside [0,1]; load with min-max normalization", row_lines[i]);
        }
      }
    }
  }
  return data;
}

Dataset load_csv(const std::filesystem::path& path, Normalization normalization,
                 std::optional<std::size_t> num_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), normalization, num_classes, path.stem().string());
}

std::string format_csv(const Dataset& data) {
  const bool has_label =
      std::any_of(data.samples.begin(), data.samples.end(), [](const Sample& s) { return s.label.has_value(); });
  std::string out;
  for (std::size_t j = 0; j < data.dim; ++j) {
    if (j > 0) out += ',';
    out += 'f' + std::to_string(j);
  }
  if (has_label) out += ",label";
  out += '\n';
  char buf[32];
  for (const Sample& s : data.samples) {
    for (std::size_t j = 0; j < s.features.size(); ++j) {
      if (j > 0) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", s.features[j]);
      out += buf;
    }
    if (has_label) {
      out += ',';
      if (s.label) out += std::to_string(*s.label);
    }
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  out << format_csv(data);
  if (!out) throw std::runtime_error("failed writing dataset " + path.string());
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices, std::string name) {
  Dataset out{std::move(name), data.num_classes, data.dim, {}};
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(data.samples.at(i));
  return out;
}

DataSplit split(const Dataset& data, const SplitFractions& fractions, Rng& rng) {
  if (data.size() < 3) throw InputError("split: dataset needs at least 3 samples");
  if (fractions.train < 0.0 || fractions.val < 0.0 || fractions.test < 0.0) {
    throw InputError("split: fractions must be non-negative");
  }
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw InputError("split: fractions must sum to 1");
  }
  const std::size_t n = data.size();
  // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
  const auto part = [n](double f) { return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9)); };
  const std::size_t n_val = part(fractions.val);
  const std::size_t n_test = part(fractions.test);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                                order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  for (auto* part_indices : {&train, &val, &test}) std::sort(part_indices->begin(), part_indices->end());

  return DataSplit{subset(data, train, data.name + "/train"), subset(data, val, data.name + "/val"),
                   subset(data, test, data.name + "/test")};
}

}  // namespace clover
