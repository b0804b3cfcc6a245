#include "clover/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>


namespace clover {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw InputError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(to_u64(key, value));
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(out)) {
    throw InputError(key + ": expected a number, got '" + value + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw InputError(key + ": expected true or false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string exact(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string bool_text(bool v) { return v ? "true" : "false"; }

std::string normalization_text(Normalization n) { return n == Normalization::kMinMax ? "minmax" : "none"; }

Normalization parse_normalization(const std::string& value) {
  if (value == "minmax") return Normalization::kMinMax;
  if (value == "none") return Normalization::kNone;
  throw InputError("data.normalization: expected minmax or none, got '" + value + "'");
}

struct Setting {
  SettingInfo info;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table = [] {
    std::vector<Setting> t;
    const auto add = [&t](std::string key, std::string help, auto set, auto get) {
      t.push_back(Setting{{std::move(key), std::move(help)}, set, get});
    };
    add("data.kind", "synthetic generator: blobs or rings",
        [](PipelineConfig& c, const std::string& v) { c.data.synthetic.kind = parse_synthetic_kind(v); },
        [](const PipelineConfig& c) { return to_string(c.data.synthetic.kind); });
    add("data.num_classes", "number of classes",
        [](PipelineConfig& c, const std::string& v) { c.data.synthetic.num_classes = to_size("data.num_classes", v); },
        [](const PipelineConfig& c) { return std::to_string(c.data.synthetic.num_classes); });
    add("data.dim", "feature dimension",
        [](PipelineConfig& c, const std::string& v) { c.data.synthetic.dim = to_size("data.dim", v); },
        [](const PipelineConfig& c) { return std::to_string(c.data.synthetic.dim); });
    add("data.samples_per_class", "synthetic samples per class",
        [](PipelineConfig& c, const std::string& v) {
          c.data.synthetic.samples_per_class = to_size("data.samples_per_class", v);
        },
        [](const PipelineConfig& c) { return std::to_string(c.data.synthetic.samples_per_class); });
    add("data.spread", "synthetic noise standard deviation",
        [](PipelineConfig& c, const std::string& v) { c.data.synthetic.spread = to_double("data.spread", v); },
        [](const PipelineConfig& c) { return exact(c.data.synthetic.spread); });
    add("data.csv", "load this CSV instead of generating data (empty: synthetic)",
        [](PipelineConfig& c, const std::string& v) {
          if (v.empty()) {
            c.data.csv.reset();
          } else {
            c.data.csv = v;
          }
        },
        [](const PipelineConfig& c) { return c.data.csv ? c.data.csv->string() : std::string(); });
    add("data.normalization", "CSV normalization: minmax or none",
        [](PipelineConfig& c, const std::string& v) { c.data.normalization = parse_normalization(v); },
        [](const PipelineConfig& c) { return normalization_text(c.data.normalization); });
    add("data.split", "train,val,test fractions",
        [](PipelineConfig& c, const std::string& v) {
          const auto parts = split_list(v, ',');
          if (parts.size() != 3) throw InputError("data.split: expected three comma-separated fractions");
          c.data.split = SplitFractions{to_double("data.split", parts[0]), to_double("data.split", parts[1]),
                                        to_double("data.split", parts[2])};
        },
        [](const PipelineConfig& c) {
          return exact(c.data.split.train) + "," + exact(c.data.split.val) + "," + exact(c.data.split.test);
        });
    add("model.hidden", "comma-separated hidden layer widths",
        [](PipelineConfig& c, const std::string& v) {
          std::vector<std::size_t> widths;
          for (const auto& part : split_list(v, ',')) widths.push_back(to_size("model.hidden", part));
          c.hidden = std::move(widths);
        },
        [](const PipelineConfig& c) {
          std::string out;
          for (std::size_t i = 0; i < c.hidden.size(); ++i) out += (i ? "," : "") + std::to_string(c.hidden[i]);
          return out;
        });
    add("train.epochs", "initial training epochs",
        [](PipelineConfig& c, const std::string& v) { c.train.epochs = to_size("train.epochs", v); },
        [](const PipelineConfig& c) { return std::to_string(c.train.epochs); });
    add("train.lr", "initial training learning rate",
        [](PipelineConfig& c, const std::string& v) { c.train.lr = to_double("train.lr", v); },
        [](const PipelineConfig& c) { return exact(c.train.lr); });
    add("train.batch_size", "initial training batch size",
        [](PipelineConfig& c, const std::string& v) { c.train.batch_size = to_size("train.batch_size", v); },
        [](const PipelineConfig& c) { return std::to_string(c.train.batch_size); });
    add("fuzz.epsilon", "perturbation bound",
        [](PipelineConfig& c, const std::string& v) { c.fuzz.epsilon = to_double("fuzz.epsilon", v); },
        [](const PipelineConfig& c) { return exact(c.fuzz.epsilon); });
    add("fuzz.delta", "context radius for CC",
        [](PipelineConfig& c, const std::string& v) { c.fuzz.delta = to_double("fuzz.delta", v); },
        [](const PipelineConfig& c) { return exact(c.fuzz.delta); });
    add("fuzz.k", "context samples per CC evaluation",
        [](PipelineConfig& c, const std::string& v) { c.fuzz.k = to_size("fuzz.k", v); },
        [](const PipelineConfig& c) { return std::to_string(c.fuzz.k); });
    add("fuzz.m", "mean attempts per seed and round",
        [](PipelineConfig& c, const std::string& v) { c.fuzz.m = to_size("fuzz.m", v); },
        [](const PipelineConfig& c) { return std::to_string(c.fuzz.m); });
    add("fuzz.max_lr", "peak of the cyclic step schedule",
        [](PipelineConfig& c, const std::string& v) { c.fuzz.max_lr = to_double("fuzz.max_lr", v); },
        [](const PipelineConfig& c) { return exact(c.fuzz.max_lr); });
    add("fuzz.p_norm", "linf or l2",
        [](PipelineConfig& c, const std::string& v) { c.fuzz.p_norm = parse_pnorm(v); },
        [](const PipelineConfig& c) { return to_string(c.fuzz.p_norm); });
    add("fuzz.raw_gradient", "step along raw gradients instead of sign/unit vectors",
        [](PipelineConfig& c, const std::string& v) { c.fuzz.raw_gradient = to_bool("fuzz.raw_gradient", v); },
        [](const PipelineConfig& c) { return bool_text(c.fuzz.raw_gradient); });
    add("fuzz.budget_attempts", "attempts after initialization (empty: unlimited)",
        [](PipelineConfig& c, const std::string& v) {
          if (v.empty()) {
            c.fuzz.budget.attempts.reset();
          } else {
            c.fuzz.budget.attempts = to_size("fuzz.budget_attempts", v);
          }
        },
        [](const PipelineConfig& c) {
          return c.fuzz.budget.attempts ? std::to_string(*c.fuzz.budget.attempts) : std::string();
        });
    add("fuzz.budget_seconds", "wall-clock limit in seconds (empty: none)",
        [](PipelineConfig& c, const std::string& v) {
          if (v.empty()) {
            c.fuzz.budget.seconds.reset();
          } else {
            c.fuzz.budget.seconds = to_double("fuzz.budget_seconds", v);
          }
        },
        [](const PipelineConfig& c) { return c.fuzz.budget.seconds ? exact(*c.fuzz.budget.seconds) : std::string(); });
    add("fuzz.guiding_metric", "CC, Gini or FOL",
        [](PipelineConfig& c, const std::string& v) { c.fuzz.guiding_metric = parse_guiding_metric(v); },
        [](const PipelineConfig& c) { return to_string(c.fuzz.guiding_metric); });
    add("fuzz.select_order", "highest or lowest",
        [](PipelineConfig& c, const std::string& v) { c.fuzz.select_order = parse_select_order(v); },
        [](const PipelineConfig& c) { return to_string(c.fuzz.select_order); });
    add("fuzz.use_seed_equivalence", "combine peer perturbations into the search direction",
        [](PipelineConfig& c, const std::string& v) {
          c.fuzz.use_seed_equivalence = to_bool("fuzz.use_seed_equivalence", v);
        },
        [](const PipelineConfig& c) { return bool_text(c.fuzz.use_seed_equivalence); });
    add("fuzz.eq_update", "every_case or on_beta",
        [](PipelineConfig& c, const std::string& v) { c.fuzz.eq_update = parse_eq_update(v); },
        [](const PipelineConfig& c) { return to_string(c.fuzz.eq_update); });
    add("attack.fgsm_step", "FGSM step length (empty: epsilon)",
        [](PipelineConfig& c, const std::string& v) {
          if (v.empty()) {
            c.attack.fgsm_step.reset();
          } else {
            c.attack.fgsm_step = to_double("attack.fgsm_step", v);
          }
        },
        [](const PipelineConfig& c) { return c.attack.fgsm_step ? exact(*c.attack.fgsm_step) : std::string(); });
    add("attack.pgd_step", "PGD step length (empty: epsilon / 6)",
        [](PipelineConfig& c, const std::string& v) {
          if (v.empty()) {
            c.attack.pgd_step.reset();
          } else {
            c.attack.pgd_step = to_double("attack.pgd_step", v);
          }
        },
        [](const PipelineConfig& c) { return c.attack.pgd_step ? exact(*c.attack.pgd_step) : std::string(); });
    add("attack.pgd_iters", "PGD iterations",
        [](PipelineConfig& c, const std::string& v) { c.attack.pgd_iters = to_size("attack.pgd_iters", v); },
        [](const PipelineConfig& c) { return std::to_string(c.attack.pgd_iters); });
    add("pipeline.source", "pool source: clover or fgsm_pgd_universe",
        [](PipelineConfig& c, const std::string& v) { c.source = parse_pool_source(v); },
        [](const PipelineConfig& c) { return to_string(c.source); });
    add("pipeline.pool_per_attacker_count", "attempts per attacker when the pool is an FGSM+PGD universe",
        [](PipelineConfig& c, const std::string& v) {
          c.pool_per_attacker_count = to_size("pipeline.pool_per_attacker_count", v);
        },
        [](const PipelineConfig& c) { return std::to_string(c.pool_per_attacker_count); });
    add("pipeline.cc_section", "restrict the pool to a CC section: index, top or bottom (empty: whole pool)",
        [](PipelineConfig& c, const std::string& v) { c.cc_section = v; },
        [](const PipelineConfig& c) { return c.cc_section; });
    add("pipeline.cc_sections", "number of equal CC ranges",
        [](PipelineConfig& c, const std::string& v) { c.cc_sections = to_size("pipeline.cc_sections", v); },
        [](const PipelineConfig& c) { return std::to_string(c.cc_sections); });
    add("select.selector", "context, random, gini, be_st or km_st",
        [](PipelineConfig& c, const std::string& v) { c.selector = parse_selector(v); },
        [](const PipelineConfig& c) { return to_string(c.selector); });
    add("select.n", "suite size",
        [](PipelineConfig& c, const std::string& v) { c.n = to_size("select.n", v); },
        [](const PipelineConfig& c) { return std::to_string(c.n); });
    add("select.km_sections", "number of FOL sections for km_st",
        [](PipelineConfig& c, const std::string& v) { c.km_sections = to_size("select.km_sections", v); },
        [](const PipelineConfig& c) { return std::to_string(c.km_sections); });
    add("retrain.epochs", "finetuning epochs",
        [](PipelineConfig& c, const std::string& v) { c.retrain.epochs = to_size("retrain.epochs", v); },
        [](const PipelineConfig& c) { return std::to_string(c.retrain.epochs); });
    add("retrain.lr", "finetuning learning rate",
        [](PipelineConfig& c, const std::string& v) { c.retrain.lr = to_double("retrain.lr", v); },
        [](const PipelineConfig& c) { return exact(c.retrain.lr); });
    add("retrain.batch_size", "finetuning batch size",
        [](PipelineConfig& c, const std::string& v) { c.retrain.batch_size = to_size("retrain.batch_size", v); },
        [](const PipelineConfig& c) { return std::to_string(c.retrain.batch_size); });
    add("assessment.per_attacker_count", "attempts per attacker for the assessment universe",
        [](PipelineConfig& c, const std::string& v) {
          c.per_attacker_count = to_size("assessment.per_attacker_count", v);
        },
        [](const PipelineConfig& c) { return std::to_string(c.per_attacker_count); });
    add("run.seed", "root seed of every random stream",
        [](PipelineConfig& c, const std::string& v) { c.seed = to_u64("run.seed", v); },
        [](const PipelineConfig& c) { return std::to_string(c.seed); });
    add("run.output_dir", "artifact directory (empty: none)",
        [](PipelineConfig& c, const std::string& v) {
          if (v.empty()) {
            c.output_dir.reset();
          } else {
            c.output_dir = v;
          }
        },
        [](const PipelineConfig& c) { return c.output_dir ? c.output_dir->string() : std::string(); });
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<SettingInfo>& setting_catalog() {
  static const std::vector<SettingInfo> catalog = [] {
    std::vector<SettingInfo> out;
    for (const Setting& s : settings()) out.push_back(s.info);
    return out;
  }();
  return catalog;
}

void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (const Setting& s : settings()) {
    if (s.info.key == key) {
      s.set(cfg, value);
      return;
    }
  }
  throw InputError("unknown setting '" + key + "'");
}

std::map<std::string, std::string> config_settings(const PipelineConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const Setting& s : settings()) out[s.info.key] = s.get(cfg);
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_assignments(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& item : split_list(text, ';')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InputError("expected key=value, got '" + item + "'");
    out.emplace_back(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
  return out;
}

ConfigFile parse_config(const std::string& text) {
  ConfigFile file;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ParseError("empty section name", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key", line_no);
    if (section.empty()) throw ParseError("setting '" + key + "' outside a section", line_no);
    if (section == "grid") {
      if (key.rfind("variant.", 0) != 0 || key.size() == 8) {
        throw ParseError("grid entries must be variant.<id> = ...", line_no);
      }
      try {
        file.variants.push_back(Variant{key.substr(8), parse_assignments(value)});
      } catch (const InputError& e) {
        throw ParseError(e.what(), line_no);
      }
      continue;
    }
    file.entries.push_back(ConfigEntry{section + "." + key, value, line_no});
  }
  return file;
}

ConfigFile load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void apply_config(PipelineConfig& cfg, const ConfigFile& file) {
  for (const ConfigEntry& e : file.entries) {
    try {
      apply_setting(cfg, e.key, e.value);
    } catch (const InputError& err) {
      throw ParseError(err.what(), e.line);
    }
  }
}

std::string format_config(const PipelineConfig& cfg) {
  std::string out;
  std::string section;
  for (const auto& [key, value] : config_settings(cfg)) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += '\n';
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

}  // namespace clover
