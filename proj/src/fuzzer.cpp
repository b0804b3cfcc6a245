#include "clover/fuzzer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace clover {

GuidingMetric parse_guiding_metric(const std::string& text) {
  if (text == "CC" || text == "cc") return GuidingMetric::kCC;
  if (text == "Gini" || text == "gini") return GuidingMetric::kGini;
  if (text == "FOL" || text == "fol") return GuidingMetric::kFOL;
  throw InputError("unknown guiding metric '" + text + "' (expected CC, Gini or FOL)");
}

std::string to_string(GuidingMetric metric) {
  switch (metric) {
    case GuidingMetric::kCC: return "CC";
    case GuidingMetric::kGini: return "Gini";
    case GuidingMetric::kFOL: return "FOL";
  }
  return "CC";
}

SelectOrder parse_select_order(const std::string& text) {
  if (text == "highest") return SelectOrder::kHighest;
  if (text == "lowest") return SelectOrder::kLowest;
  throw InputError("unknown select order '" + text + "' (expected highest or lowest)");
}

std::string to_string(SelectOrder order) { return order == SelectOrder::kHighest ? "highest" : "lowest"; }

EqUpdate parse_eq_update(const std::string& text) {
  if (text == "every_case") return EqUpdate::kEveryCase;
  if (text == "on_beta") return EqUpdate::kOnBeta;
  throw InputError("unknown eq_update '" + text + "' (expected every_case or on_beta)");
}

std::string to_string(EqUpdate mode) { return mode == EqUpdate::kEveryCase ? "every_case" : "on_beta"; }

void FuzzConfig::validate() const {
  if (!(epsilon > 0.0)) throw InputError("fuzz: epsilon must be positive");
  cc_params().validate(epsilon);
  if (m == 0) throw InputError("fuzz: m must be >= 1");
  if (!(max_lr > 0.0 && max_lr <= 1.0)) throw InputError("fuzz: max_lr must lie in (0, 1]");
  if (!budget.attempts && !budget.seconds) throw InputError("fuzz: budget needs an attempt or a seconds limit");
  if (budget.seconds && !(*budget.seconds >= 0.0)) throw InputError("fuzz: budget seconds must be >= 0");
}

AttackConfig FuzzConfig::attack() const {
  AttackConfig cfg;
  cfg.epsilon = epsilon;
  cfg.p_norm = p_norm;
  cfg.fgsm_step = epsilon;
  cfg.pgd_step = epsilon;
  cfg.raw_gradient = raw_gradient;
  return cfg;
}

std::size_t FuzzConfig::translate_steps() const {
  // The slack keeps ratios such as 0.05 / 0.01 = 5.000000000000001 at 5.
  return static_cast<std::size_t>(std::ceil(epsilon / delta - 1e-9));
}

double cyclic_rate(std::size_t r, std::size_t steps, double max_lr) {
  return std::abs(max_lr * std::sin(std::numbers::pi * static_cast<double>(r) / static_cast<double>(steps + 1)));
}

std::vector<Seed> make_seeds(const Classifier& model, const Dataset& data) {
  std::vector<Seed> seeds;
  seeds.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data.samples[i];
    seeds.push_back(Seed{i, s.features, s.label ? *s.label : model.predict_label(s.features)});
  }
  return seeds;
}

EquivalenceIndex::EquivalenceIndex(std::size_t num_classes, std::span<const ClassId> seed_labels)
    : num_classes_(num_classes),
      labels_(seed_labels.begin(), seed_labels.end()),
      columns_(seed_labels.size(), kNoLabel),
      cells_(num_classes * (num_classes + 1)) {
  if (num_classes == 0) throw InputError("equivalence index: num_classes must be >= 1");
  for (SeedId s = 0; s < labels_.size(); ++s) {
    if (labels_[s] < 0 || static_cast<std::size_t>(labels_[s]) >= num_classes) {
      throw InputError("equivalence index: seed label out of range");
    }
    cells_[static_cast<std::size_t>(labels_[s]) * (num_classes_ + 1) + column_index(kNoLabel)].insert(s);
  }
}

std::size_t EquivalenceIndex::column_index(ClassId column) const {
  if (column == kNoLabel) return num_classes_;
  if (column < 0 || static_cast<std::size_t>(column) >= num_classes_) {
    throw InputError("equivalence index: adversarial label out of range");
  }
  return static_cast<std::size_t>(column);
}

void EquivalenceIndex::check_seed(SeedId seed) const {
  if (seed >= labels_.size()) throw InputError("equivalence index: unknown seed " + std::to_string(seed));
}

void EquivalenceIndex::record_label(SeedId seed, ClassId v) {
  check_seed(seed);
  const std::size_t to = column_index(v);
  const std::size_t row = static_cast<std::size_t>(labels_[seed]) * (num_classes_ + 1);
  const std::size_t from = column_index(columns_[seed]);
  if (from == to) return;
  cells_[row + from].erase(seed);
  cells_[row + to].insert(seed);
  columns_[seed] = v;
}

const std::set<SeedId>& EquivalenceIndex::class_members(SeedId seed) const {
  check_seed(seed);
  return cell(labels_[seed], columns_[seed]);
}

ClassId EquivalenceIndex::column_of(SeedId seed) const {
  check_seed(seed);
  return columns_[seed];
}

ClassId EquivalenceIndex::seed_label(SeedId seed) const {
  check_seed(seed);
  return labels_[seed];
}

const std::set<SeedId>& EquivalenceIndex::cell(ClassId row, ClassId column) const {
  if (row < 0 || static_cast<std::size_t>(row) >= num_classes_) throw InputError("equivalence index: bad row");
  return cells_[static_cast<std::size_t>(row) * (num_classes_ + 1) + column_index(column)];
}

bool EquivalenceIndex::check_partition() const {
  std::vector<int> seen(labels_.size(), 0);
  for (std::size_t row = 0; row < num_classes_; ++row) {
    for (std::size_t col = 0; col <= num_classes_; ++col) {
      for (SeedId s : cells_[row * (num_classes_ + 1) + col]) {
        if (s >= labels_.size()) return false;
        if (static_cast<std::size_t>(labels_[s]) != row) return false;
        if (column_index(columns_[s]) != col) return false;
        ++seen[s];
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

std::vector<std::size_t> compute_energy(std::span<const std::size_t> successes, std::size_t m) {
  std::size_t total = 0;
  for (std::size_t c : successes) {
    if (c == 0) throw InputError("compute_energy: success counts must be >= 1");
    total += c;
  }
  const std::size_t n = successes.size();
  std::vector<std::size_t> energy;
  energy.reserve(n);
  for (std::size_t c : successes) energy.push_back((m * c * n + total - 1) / total);
  return energy;
}

std::vector<Afo> build_ac(SeedId seed, const EquivalenceIndex& index, const AdversarialFront& front,
                          std::size_t energy, Rng& rng) {
  const auto& members = index.class_members(seed);
  std::vector<SeedId> others;
  others.reserve(members.size());
  for (SeedId s : members) {
    if (s != seed) others.push_back(s);
  }
  std::vector<Afo> ac;
  if (others.empty()) {
    ac.push_back(front.at(seed));
    return ac;
  }
  rng.shuffle(std::span<SeedId>(others));
  others.resize(std::min(energy, others.size()));
  ac.reserve(others.size());
  for (SeedId s : others) ac.push_back(front.at(s));
  return ac;
}

AttemptBudget::AttemptBudget(const Budget& budget)
    : limit_(budget.attempts), seconds_(budget.seconds), start_(std::chrono::steady_clock::now()) {}

bool AttemptBudget::exhausted() const {
  if (limit_ && used_ >= *limit_) return true;
  if (seconds_) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    if (elapsed.count() >= *seconds_) return true;
  }
  return false;
}

double guiding_value(GuidingMetric metric, const Classifier& model, std::span<const double> x, ClassId seed_label,
                     ClassId adversarial_label, const ContextNoise& noise, double epsilon) {
  switch (metric) {
    case GuidingMetric::kCC: return contextual_confidence(model, x, adversarial_label, noise);
    case GuidingMetric::kGini: return gini(model.predict(x));
    case GuidingMetric::kFOL: return fol(model, x, seed_label, epsilon);
  }
  return 0.0;
}

bool improves(double score, double best, SelectOrder order) {
  return order == SelectOrder::kHighest ? score > best : score < best;
}

double initial_cc_star(SelectOrder order) {
  return order == SelectOrder::kHighest ? -std::numeric_limits<double>::infinity()
                                        : std::numeric_limits<double>::infinity();
}

namespace {

std::vector<double> difference(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

void emit(TranslateContext& ctx, const CampaignEvent& event) {
  if (ctx.log) ctx.log->push_back(event);
  if (ctx.hooks && ctx.hooks->on_event && ctx.index && ctx.front) {
    ctx.hooks->on_event(event, CampaignState{*ctx.index, *ctx.front, ctx.successes});
  }
}

TestCase make_case(const Classifier& model, const Seed& seed, std::vector<double> x, ClassId v,
                   const FuzzConfig& cfg, const ContextNoise& noise, double& score) {
  const double cc = contextual_confidence(model, x, v, noise);
  score = cfg.guiding_metric == GuidingMetric::kCC
              ? cc
              : guiding_value(cfg.guiding_metric, model, x, seed.label, v, noise, cfg.epsilon);
  return TestCase{std::move(x), seed.id, seed.label, v, cc, score};
}

}  // namespace

TranslateResult context_translate(const Classifier& model, const Seed& seed, std::span<const Afo> ac,
                                  const Afo& beta, std::span<const double> grad, const FuzzConfig& cfg,
                                  TranslateContext& ctx) {
  if (ac.empty()) throw InputError("context_translate: empty AC list");
  const AttackConfig attack = cfg.attack();
  const std::size_t steps = cfg.translate_steps();
  TranslateResult result{beta, {}, 0};
  std::vector<double> composite(seed.x.size());

  for (const Afo& dir : ac) {
    if (ctx.budget.exhausted()) break;
    ctx.budget.consume();

    if (cfg.use_seed_equivalence) {
      for (std::size_t j = 0; j < composite.size(); ++j) composite[j] = dir.delta[j] + result.beta.delta[j] + grad[j];
    } else {
      composite.assign(grad.begin(), grad.end());
    }
    if (ctx.hooks && ctx.hooks->on_direction) ctx.hooks->on_direction(seed.id, composite, grad);

    std::vector<double> x = step(seed.x, seed.x, composite, 1.0, attack);
    for (std::size_t r = 1; r <= steps; ++r) {
      const std::vector<double> g = model.loss_gradient(x, seed.label);
      x = step(seed.x, x, g, cyclic_rate(r, steps, cfg.max_lr), attack);
    }

    CampaignEvent event{ctx.budget.used(), "translate", seed.id, "benign", kNoLabel, 0.0, result.beta.cc_star,
                        ctx.round};
    const ClassId v = model.predict_label(x);
    if (v != seed.label) {
      double score = 0.0;
      TestCase tc = make_case(model, seed, x, v, cfg, ctx.noise, score);
      event.outcome = "kept";
      event.adversarial_label = v;
      event.score = score;
      if (ctx.index && cfg.eq_update == EqUpdate::kEveryCase) ctx.index->record_label(seed.id, v);
      if (improves(score, result.beta.cc_star, cfg.select_order)) {
        result.beta.delta = difference(x, seed.x);
        result.beta.adversarial_label = v;
        result.beta.cc_star = score;
        ++result.evolved;
        event.outcome = "evolved";
        event.cc_star = score;
        if (ctx.index && cfg.eq_update == EqUpdate::kOnBeta) ctx.index->record_label(seed.id, v);
      }
      result.cases.push_back(std::move(tc));
    }
    emit(ctx, event);
  }
  return result;
}

CampaignResult context_fuzz(const Classifier& model, std::span<const Seed> seeds, const FuzzConfig& cfg,
                            const CampaignHooks& hooks) {
  cfg.validate();
  if (seeds.empty()) throw InputError("context_fuzz: no seeds");
  std::vector<ClassId> labels;
  labels.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (seeds[i].id != i) throw InputError("context_fuzz: seed ids must be 0..n-1 in order");
    if (seeds[i].x.size() != model.input_dim()) throw InputError("context_fuzz: seed dimension mismatch");
    labels.push_back(seeds[i].label);
  }

  const std::size_t n = seeds.size();
  const std::size_t dim = model.input_dim();
  const AttackConfig attack = cfg.attack();
  Rng rng(cfg.seed);
  CampaignResult result{TestPool(to_string(cfg.guiding_metric)),
                        AdversarialFront(n),
                        std::vector<std::size_t>(n, 1),
                        EquivalenceIndex(model.num_classes(), labels),
                        {},
                        n,
                        0,
                        0};
  for (std::size_t i = 0; i < n; ++i) {
    result.front[i] = Afo{std::vector<double>(dim, 0.0), seeds[i].label, kNoLabel, initial_cc_star(cfg.select_order)};
  }

  AttemptBudget budget(cfg.budget);
  const CampaignHooks* hook_ptr = (hooks.on_event || hooks.on_direction) ? &hooks : nullptr;

  {
    const ContextNoise noise = ContextNoise::draw(cfg.cc_params(), dim, rng);
    TranslateContext ctx{budget, noise, &result.index, &result.log, hook_ptr, &result.front, result.successes, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const Seed& seed = seeds[i];
      const std::vector<double> grad = model.loss_gradient(seed.x, seed.label);
      std::vector<double> x = step(seed.x, seed.x, grad, 1.0, attack);
      CampaignEvent event{0, "init", seed.id, "benign", kNoLabel, 0.0, result.front[i].cc_star, 0};
      const ClassId v = model.predict_label(x);
      if (v != seed.label) {
        double score = 0.0;
        TestCase tc = make_case(model, seed, x, v, cfg, noise, score);
        result.front[i] = Afo{difference(x, seed.x), seed.label, v, score};
        result.successes[i] += 1;
        result.index.record_label(seed.id, v);
        result.pool.add(std::move(tc));
        event.outcome = "evolved";
        event.adversarial_label = v;
        event.score = score;
        event.cc_star = score;
      }
      emit(ctx, event);
    }
  }

  std::vector<std::size_t> energy;
  std::size_t i = 0;
  while (!budget.exhausted()) {
    if (i == 0) energy = compute_energy(result.successes, cfg.m);
    const Seed& seed = seeds[i];
    const std::vector<Afo> ac = build_ac(seed.id, result.index, result.front, energy[i], rng);
    const std::vector<double> grad = model.loss_gradient(seed.x, seed.label);
    const ContextNoise noise = ContextNoise::draw(cfg.cc_params(), dim, rng);
    TranslateContext ctx{budget, noise, &result.index, &result.log, hook_ptr, &result.front, result.successes,
                         result.rounds};
    TranslateResult round = context_translate(model, seed, ac, result.front[i], grad, cfg, ctx);
    result.front[i] = std::move(round.beta);
    for (TestCase& tc : round.cases) result.pool.add(std::move(tc));
    result.successes[i] += round.evolved;
    i = (i + 1) % n;
    if (i == 0) ++result.rounds;
  }
  result.attempts = budget.used();
  return result;
}

nlohmann::json to_json(const CampaignEvent& event) {
  const auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return nlohmann::json{{"attempt", event.attempt},
                        {"phase", event.phase},
                        {"seed_id", event.seed_id},
                        {"outcome", event.outcome},
                        {"adversarial_label", event.adversarial_label},
                        {"score", event.score},
                        {"cc_star", finite_or_null(event.cc_star)},
                        {"round", event.round}};
}

std::string format_campaign_log(std::span<const CampaignEvent> events) {
  std::string out;
  for (const CampaignEvent& e : events) {
    out += to_json(e).dump();
    out += '\n';
  }
  return out;
}

std::vector<CampaignEvent> parse_campaign_log(const std::string& text) {
  std::vector<CampaignEvent> events;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CampaignEvent e;
      e.attempt = j.at("attempt").get<std::size_t>();
      e.phase = j.at("phase").get<std::string>();
      e.seed_id = j.at("seed_id").get<SeedId>();
      e.outcome = j.at("outcome").get<std::string>();
      e.adversarial_label = j.at("adversarial_label").get<ClassId>();
      e.score = j.at("score").get<double>();
      e.cc_star = j.at("cc_star").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("cc_star").get<double>();
      e.round = j.at("round").get<std::size_t>();
      events.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(ex.what(), line_no);
    }
  }
  return events;
}

}  // namespace clover
