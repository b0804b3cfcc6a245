#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clover/types.hpp"

namespace clover {

// A perturbed sample derived from one seed. `score` is the value of the
// guiding metric that admitted it; `cc` is its contextual confidence against
// the model it was generated on (absent until computed).
struct TestCase {
  std::vector<double> data;
  SeedId seed_id = 0;
  ClassId seed_label = 0;
  ClassId adversarial_label = 0;
  std::optional<double> cc;
  double score = 0.0;

  bool operator==(const TestCase&) const = default;
};

// Test cases grouped by seed. Seeds iterate in ascending id order and each
// seed's list keeps insertion order. Exact duplicates of (seed_id, data)
// are dropped on insertion.
class TestPool {
 public:
  TestPool() = default;
  explicit TestPool(std::string guiding_metric) : guiding_metric_(std::move(guiding_metric)) {}

  // Returns false when the case duplicates one already stored.
  bool add(TestCase tc);

  const std::map<SeedId, std::vector<TestCase>>& by_seed() const { return by_seed_; }
  std::map<SeedId, std::vector<TestCase>>& mutable_by_seed() { return by_seed_; }
  std::vector<TestCase> flatten() const;

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::size_t seed_count() const { return by_seed_.size(); }

  const std::string& guiding_metric() const { return guiding_metric_; }
  void set_guiding_metric(std::string name) { guiding_metric_ = std::move(name); }

  static TestPool from_cases(const std::vector<TestCase>& cases, std::string guiding_metric);

 private:
  std::map<SeedId, std::vector<TestCase>> by_seed_;
  std::size_t size_ = 0;
  std::string guiding_metric_ = "CC";
};

struct Provenance {
  std::string strategy;
  nlohmann::json parameters = nlohmann::json::object();
};

struct TestSuite {
  std::vector<TestCase> cases;
  Provenance provenance;
  std::vector<std::string> warnings;

  std::size_t size() const { return cases.size(); }
};

// JSON-lines, one record per case:
//   {seed_id, seed_label, adversarial_label, cc, score, guiding_metric, data}
nlohmann::json to_json(const TestCase& tc, const std::string& guiding_metric);
TestCase test_case_from_json(const nlohmann::json& record);

std::string format_pool_jsonl(const TestPool& pool);
void save_pool(const TestPool& pool, const std::filesystem::path& path);
TestPool load_pool(const std::filesystem::path& path);
TestPool parse_pool_jsonl(const std::string& text);

// Same record schema, preceded by a {"provenance": {...}} header line.
std::string format_suite_jsonl(const TestSuite& suite, const std::string& guiding_metric);
void save_suite(const TestSuite& suite, const std::string& guiding_metric, const std::filesystem::path& path);
TestSuite load_suite(const std::filesystem::path& path);
TestSuite parse_suite_jsonl(const std::string& text);

// 64-bit FNV-1a, used to fingerprint serialized artifacts.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace clover
