#include "tmq/experiments.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "tmq/embeddings.hpp"
#include "tmq/errors.hpp"

namespace tmq {

namespace {

constexpr std::array<std::pair<PoolMethod, std::string_view>, 6> kPoolMethodNames{{
    {PoolMethod::StochasticMQ, "S-MQ"},
    {PoolMethod::UncertaintyHillClimb, "US-HC-MQ"},
    {PoolMethod::UncertaintyBeam, "US-BS-MQ"},
    {PoolMethod::StochasticHillClimb, "S-HC-MQ"},
    {PoolMethod::Ideal, "IDEAL"},
    {PoolMethod::Wna, "WNA"},
}};

constexpr std::uint64_t kCoreStream = 0xC07E;
constexpr std::uint64_t kSwitchStream = 0x5317C4;

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::string format_fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

SentenceInstance record_instance(const Dataset& dataset, std::size_t record, const PosLexicon& lexicon,
                                 const std::string& prefix) {
  const auto& r = dataset.records[record];
  return make_instance(r.text, lexicon, prefix + std::to_string(record), r.label);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

std::string_view to_string(PoolMethod method) {
  for (const auto& [m, name] : kPoolMethodNames) {
    if (m == method) return name;
  }
  return "?";
}

std::optional<PoolMethod> parse_pool_method(std::string_view name) {
  for (const auto& [m, n] : kPoolMethodNames) {
    if (n == name) return m;
  }
  return std::nullopt;
}

std::optional<Method> synthesis_method(PoolMethod method) {
  switch (method) {
    case PoolMethod::StochasticMQ: return Method::StochasticMQ;
    case PoolMethod::UncertaintyHillClimb: return Method::UncertaintyHillClimb;
    case PoolMethod::UncertaintyBeam: return Method::UncertaintyBeam;
    case PoolMethod::StochasticHillClimb: return Method::StochasticHillClimb;
    default: return std::nullopt;
  }
}

std::vector<LabeledText> parse_labeled_csv(std::string_view content, const std::string& source) {
  std::vector<LabeledText> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;

    if (!header_seen) {
      std::string header = normalize_word(trim(line));
      header.erase(std::remove(header.begin(), header.end(), ' '), header.end());
      if (header != "label,text") throw ParseError(source, line_no, "expected header 'label,text'");
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw ParseError(source, line_no, "expected label,text");
    const std::string label = trim(line.substr(0, comma));
    if (label != "0" && label != "1") throw ParseError(source, line_no, "label must be 0 or 1, got '" + label + "'");

    std::string_view rest = line.substr(comma + 1);
    std::string text;
    const std::string lead = trim(rest);
    if (!lead.empty() && lead.front() == '"') {
      std::size_t i = 1;
      bool closed = false;
      for (; i < lead.size(); ++i) {
        if (lead[i] == '"') {
          if (i + 1 < lead.size() && lead[i + 1] == '"') {
            text.push_back('"');
            ++i;
          } else {
            closed = true;
            ++i;
            break;
          }
        } else {
          text.push_back(lead[i]);
        }
      }
      if (!closed || i != lead.size()) throw ParseError(source, line_no, "malformed quoted text field");
    } else {
      text = lead;
    }
    text = trim(text);
    if (text.empty()) throw ParseError(source, line_no, "empty text");
    rows.push_back({std::move(text), label == "1" ? 1 : 0});
  }
  if (!header_seen) throw ParseError(source, 0, "missing 'label,text' header");
  return rows;
}

Dataset make_dataset(std::string name, std::vector<LabeledText> records, std::uint64_t split_seed,
                     double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("test fraction must lie strictly between 0 and 1");
  }
  Dataset d;
  d.name = std::move(name);
  std::unordered_set<std::string> seen;
  for (auto& r : records) {
    if (seen.insert(normalize_word(r.text)).second) d.records.push_back(std::move(r));
  }
  const std::size_t n = d.records.size();
  const auto n_test = static_cast<std::size_t>(static_cast<double>(n) * test_fraction + 0.5);
  if (n_test == 0 || n_test >= n) throw InvalidArgument("split leaves an empty train or test set");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(split_seed);
  rng.shuffle(std::span<std::size_t>(order));
  d.test_ids.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  d.train_ids.assign(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());

  std::size_t pos = 0;
  for (auto i : d.train_ids) pos += static_cast<std::size_t>(d.records[i].label);
  if (pos == 0 || pos == d.train_ids.size()) throw InvalidArgument("training split has a single class");
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, std::uint64_t split_seed, double test_fraction) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open dataset");
  std::stringstream buf;
  buf << in.rdbuf();
  return make_dataset(path.stem().string(), parse_labeled_csv(buf.str(), path.string()), split_seed, test_fraction);
}

UnlabeledPool::UnlabeledPool(const Dataset& dataset, std::span<const std::size_t> excluded) {
  std::unordered_set<std::size_t> skip(excluded.begin(), excluded.end());
  for (auto id : dataset.train_ids) {
    if (!skip.contains(id)) ids_.push_back(id);
  }
}

const std::vector<std::size_t>& UnlabeledPool::read() const {
  ++reads_;
  return ids_;
}

void UnlabeledPool::remove(std::size_t record_id) { std::erase(ids_, record_id); }

void SynonymLexicon::add(std::string_view word, std::vector<std::string> synonyms) {
  for (auto& s : synonyms) s = normalize_word(s);
  entries_[normalize_word(word)] = std::move(synonyms);
}

const std::vector<std::string>* SynonymLexicon::synonyms(std::string_view word) const {
  auto it = entries_.find(normalize_word(word));
  return it == entries_.end() ? nullptr : &it->second;
}

SynonymLexicon load_synonyms(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open synonym lexicon");
  SynonymLexicon lex;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(path.string(), line_no, "expected word<TAB>synonyms");
    std::vector<std::string> syns;
    std::istringstream list(line.substr(tab + 1));
    for (std::string s; std::getline(list, s, ',');) {
      s = trim(s);
      if (!s.empty()) syns.push_back(s);
    }
    lex.add(trim(line.substr(0, tab)), std::move(syns));
  }
  return lex;
}

OperatorProvider synonym_operators(const SynonymLexicon& synonyms, const Resources& resources) {
  return [&synonyms, &resources](const SentenceInstance& s) {
    std::vector<ModOp> ops;
    for (std::size_t pos = 0; pos < s.tokens.size(); ++pos) {
      const Token& tok = s.tokens[pos];
      if (!tok.replaceable) continue;
      const auto* list = synonyms.synonyms(tok.normalized);
      if (!list) continue;
      for (const auto& syn : *list) {
        if (syn == tok.normalized) continue;
        const auto tag = resources.lexicon.dominant(syn);
        if (!tag || *tag != tok.pos) continue;
        double d = 0.0;
        if (resources.table.contains(syn) && resources.table.contains(tok.normalized)) {
          d = resources.table.distance(tok.normalized, syn);
        }
        ops.push_back({pos, tok.surface, syn, d});
      }
    }
    return ops;
  };
}

std::vector<std::size_t> sample_core(const Dataset& dataset, std::size_t size, Rng& rng) {
  if (dataset.train_ids.size() < size) {
    throw InvalidArgument("training split has " + std::to_string(dataset.train_ids.size()) +
                          " records, fewer than the core size " + std::to_string(size));
  }
  std::vector<std::size_t> ids = dataset.train_ids;
  for (int attempt = 0; attempt < 100; ++attempt) {
    rng.shuffle(std::span<std::size_t>(ids));
    std::size_t pos = 0;
    for (std::size_t i = 0; i < size; ++i) pos += static_cast<std::size_t>(dataset.records[ids[i]].label);
    if (size < 2 || (pos > 0 && pos < size)) break;
  }
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(size)};
}

std::vector<SentenceInstance> core_instances(const Dataset& dataset, std::size_t size, std::uint64_t seed,
                                             const PosLexicon& lexicon, std::vector<std::size_t>* record_ids) {
  Rng rng = Rng::derive(seed, kCoreStream);
  const auto ids = sample_core(dataset, size, rng);
  std::vector<SentenceInstance> core;
  for (auto id : ids) core.push_back(record_instance(dataset, id, lexicon, "c"));
  if (record_ids) *record_ids = ids;
  return core;
}

AlSession::AlSession(std::vector<SentenceInstance> core, const Resources& resources, AlConfig config,
                     std::uint64_t seed, std::vector<LabeledText> test_set)
    : resources_(resources), config_(std::move(config)), seed_(seed), labeled_(std::move(core)) {
  if (labeled_.empty()) throw InvalidArgument("core set is empty");
  for (const auto& s : labeled_) {
    if (!s.provenance.root_label) throw InvalidArgument("core instance '" + s.id + "' has no label");
    labels_.push_back(*s.provenance.root_label);
  }
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    test_instances_.push_back(make_instance(test_set[i].text, resources_.lexicon, "t" + std::to_string(i)));
    test_labels_.push_back(test_set[i].label);
  }
  retrain();
  history_.push_back({0, labeled_.size(), test_accuracy(), std::nullopt});
}

void AlSession::retrain() {
  std::vector<LabeledExample> data;
  data.reserve(labeled_.size());
  for (std::size_t i = 0; i < labeled_.size(); ++i) {
    data.push_back({featurize(labeled_[i], resources_.table), labels_[i]});
  }
  model_ = train(data, config_.training);
}

std::optional<double> AlSession::test_accuracy() const {
  if (test_instances_.empty()) return std::nullopt;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test_instances_.size(); ++i) {
    const double p = predict_proba(model_, featurize(test_instances_[i], resources_.table));
    correct += static_cast<std::size_t>((p >= 0.5 ? 1 : 0) == test_labels_[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(test_instances_.size());
}

double AlSession::heuristic(const SentenceInstance& s) const { return uncertainty(model_, s, resources_.table); }

Heuristic AlSession::heuristic_fn() const {
  return [this](const SentenceInstance& s) { return heuristic(s); };
}

std::vector<SentenceInstance> AlSession::generate_pool(PoolMethod method) {
  Rng rng = Rng::derive(seed_, step() + 1);
  if (method == PoolMethod::Ideal) throw InvalidArgument("IDEAL pools are drawn from the dataset, not synthesized");
  if (method == PoolMethod::Wna) {
    if (!resources_.synonyms) throw InvalidArgument("WNA needs a synonym lexicon");
    return baseline_wna(labeled_, *resources_.synonyms, resources_, config_.pool_size,
                        config_.synthesis.max_retries, rng, ids_)
        .instances;
  }
  SynthesisConfig cfg = config_.synthesis;
  cfg.count = config_.pool_size;
  cfg.method = *synthesis_method(method);
  return synthesize(labeled_, cfg, heuristic_fn(), embedding_operators(cfg.k_neighbors, resources_.table,
                                                                        resources_.lexicon),
                    rng, ids_);
}

std::vector<SentenceInstance> AlSession::select(const std::vector<SentenceInstance>& pool) const {
  if (pool.empty()) return {};
  return select_batch(pool, model_, config_.batch_size, resources_.table);
}

void AlSession::add_batch(const std::vector<SentenceInstance>& batch, const std::vector<int>& labels) {
  if (batch.size() != labels.size()) throw InvalidArgument("batch and labels differ in length");
  std::optional<double> mean_u;
  if (!batch.empty()) {
    double total = 0.0;
    for (const auto& s : batch) total += heuristic(s);
    mean_u = total / static_cast<double>(batch.size());
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("labels must be 0 or 1");
    labeled_.push_back(batch[i]);
    labels_.push_back(labels[i]);
  }
  retrain();
  history_.push_back({history_.size(), labeled_.size(), test_accuracy(), mean_u});
}

std::vector<std::size_t> baseline_ideal(std::span<const std::size_t> unlabeled, std::size_t pool_size, Rng& rng) {
  if (unlabeled.size() < pool_size) {
    throw InvalidArgument("unlabeled pool exhausted: " + std::to_string(unlabeled.size()) + " left, " +
                          std::to_string(pool_size) + " requested");
  }
  std::vector<std::size_t> ids(unlabeled.begin(), unlabeled.end());
  // Partial Fisher-Yates: the first pool_size slots are a uniform sample.
  for (std::size_t i = 0; i < pool_size; ++i) std::swap(ids[i], ids[i + rng.index(ids.size() - i)]);
  ids.resize(pool_size);
  return ids;
}

PartialSynthesis baseline_wna(std::span<const SentenceInstance> seed, const SynonymLexicon& synonyms,
                              const Resources& resources, std::size_t count, std::size_t max_retries, Rng& rng,
                              IdGenerator& ids) {
  return stochastic_synthesis_partial(seed, count, max_retries, synonym_operators(synonyms, resources), rng, ids);
}

std::vector<RunMetrics> run_batch_al(const Dataset& dataset, PoolMethod method, const AlConfig& config,
                                     const Resources& resources, const BowOracleModel& oracle,
                                     std::size_t* unlabeled_reads) {
  std::vector<LabeledText> test;
  for (auto id : dataset.test_ids) test.push_back(dataset.records[id]);

  std::vector<RunMetrics> runs;
  for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
    const std::uint64_t seed = config.seed + rep;
    std::vector<std::size_t> core_ids;
    auto core = core_instances(dataset, config.core_size, seed, resources.lexicon, &core_ids);

    AlSession session(std::move(core), resources, config, seed, test);
    UnlabeledPool unlabeled(dataset, core_ids);

    for (std::size_t step = 1; step <= config.steps; ++step) {
      std::vector<SentenceInstance> pool;
      if (method == PoolMethod::Ideal) {
        Rng rng = Rng::derive(seed, step);
        const auto& remaining = unlabeled.read();
        for (auto id : baseline_ideal(remaining, config.pool_size, rng)) {
          pool.push_back(record_instance(dataset, id, resources.lexicon, "u"));
        }
      } else {
        pool = session.generate_pool(method);
      }
      const auto batch = session.select(pool);
      std::vector<int> labels;
      for (const auto& s : batch) {
        if (method == PoolMethod::Ideal) {
          labels.push_back(*s.provenance.root_label);
          unlabeled.remove(std::stoul(s.id.substr(1)));
        } else {
          labels.push_back(oracle_label(oracle, s).label);
        }
      }
      session.add_batch(batch, labels);
    }
    runs.push_back({std::string(to_string(method)), seed, session.history(), std::nullopt});
    if (unlabeled_reads) *unlabeled_reads += unlabeled.reads();
  }
  return runs;
}

LabelSwitchResult run_label_switch(const Dataset& dataset, std::span<const Method> methods, const AlConfig& config,
                                   const Resources& resources, const BowOracleModel& oracle) {
  LabelSwitchResult result;
  const auto operators = embedding_operators(config.synthesis.k_neighbors, resources.table, resources.lexicon);
  for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
    const std::uint64_t seed = config.seed + rep;
    std::vector<SentenceInstance> seeds;
    std::vector<LabeledExample> training;
    std::unordered_map<std::string, int> root_labels;
    for (auto& s : core_instances(dataset, config.core_size, seed, resources.lexicon)) {
      training.push_back({featurize(s, resources.table), *s.provenance.root_label});
      const int oracle_root = oracle_label(oracle, s).label;
      s.provenance.root_label = oracle_root;
      root_labels[s.id] = oracle_root;
      seeds.push_back(std::move(s));
    }
    const LinearModel model = train(training, config.training);
    const Heuristic h = [&](const SentenceInstance& s) { return uncertainty(model, s, resources.table); };

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      Rng rng = Rng::derive(seed, kSwitchStream + static_cast<std::uint64_t>(methods[mi]));
      IdGenerator ids("mq");
      SynthesisConfig cfg = config.synthesis;
      cfg.count = config.switch_examples;
      cfg.method = methods[mi];
      const auto generated = synthesize(seeds, cfg, h, operators, rng, ids);

      std::size_t changed = 0;
      std::vector<MembershipQuery> queries;
      for (const auto& g : generated) {
        changed += static_cast<std::size_t>(oracle_label(oracle, g).label != root_labels.at(g.provenance.root_id));
        queries.push_back(to_query(g, h(g)));
      }
      const double rate =
          generated.empty() ? 0.0 : static_cast<double>(changed) / static_cast<double>(generated.size());
      result.runs.push_back({std::string(to_string(methods[mi])), seed, {}, rate});
      result.queries.push_back(std::move(queries));
    }
  }
  return result;
}

double mean_switch_rate(std::span<const RunMetrics> runs, std::string_view method) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : runs) {
    if (r.method == method && r.switch_rate) {
      total += *r.switch_rate;
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

double mean_accuracy(std::span<const RunMetrics> runs, std::string_view method, std::size_t step) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : runs) {
    if (r.method == method && step < r.steps.size() && r.steps[step].accuracy) {
      total += *r.steps[step].accuracy;
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

std::string metrics_csv(std::span<const RunMetrics> runs) {
  std::string out = "method,seed,step,n_labeled,accuracy\n";
  for (const auto& r : runs) {
    for (const auto& s : r.steps) {
      out += r.method + "," + std::to_string(r.seed) + "," + std::to_string(s.step) + "," +
             std::to_string(s.n_labeled) + "," + (s.accuracy ? format_fixed(*s.accuracy) : std::string()) + "\n";
    }
  }
  return out;
}

std::string switch_csv(std::span<const RunMetrics> runs) {
  std::string out = "method,seed,switch_rate\n";
  for (const auto& r : runs) {
    if (!r.switch_rate) continue;
    out += r.method + "," + std::to_string(r.seed) + "," + format_fixed(*r.switch_rate) + "\n";
  }
  return out;
}

void emit_metrics(std::span<const RunMetrics> runs, const std::filesystem::path& path) {
  if (runs.empty()) throw InvalidArgument("no runs to emit");
  const bool switches = std::any_of(runs.begin(), runs.end(), [](const RunMetrics& r) { return r.switch_rate; });
  write_file(path, switches ? switch_csv(runs) : metrics_csv(runs));
}

}  // namespace tmq
