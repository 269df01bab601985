#include "tmq/synthesis.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "tmq/embeddings.hpp"
#include "tmq/errors.hpp"

namespace tmq {

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 4> kMethodNames{{
    {Method::StochasticMQ, "S-MQ"},
    {Method::UncertaintyHillClimb, "US-HC-MQ"},
    {Method::UncertaintyBeam, "US-BS-MQ"},
    {Method::StochasticHillClimb, "S-HC-MQ"},
}};

// One uniformly random operator on one uniformly random base; tries up to
// |Omega| * max_retries draws before giving up.
bool stochastic_step(CandidatePool& pool, std::size_t max_retries, const OperatorProvider& operators, Rng& rng,
                     IdGenerator& ids) {
  const std::size_t attempts = std::max<std::size_t>(1, pool.size() * std::max<std::size_t>(1, max_retries));
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    const SentenceInstance& base = pool[rng.index(pool.size())];
    const auto ops = operators(base);
    if (ops.empty()) continue;
    SentenceInstance next = substitute(base, ops[rng.index(ops.size())]);
    if (pool.contains(next)) continue;
    next.id = ids.next();
    pool.add(std::move(next));
    return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  for (const auto& [m, n] : kMethodNames) {
    if (n == name) return m;
  }
  return std::nullopt;
}

void SynthesisConfig::validate() const {
  if (count < 1) throw InvalidArgument("K must be at least 1");
  if (k_neighbors < 1) throw InvalidArgument("k must be at least 1");
  if (depth_min < 1 || depth_max < depth_min) throw InvalidArgument("depth range must be nonempty with min >= 1");
  if (beam_width < 1) throw InvalidArgument("beam width must be at least 1");
}

OperatorProvider embedding_operators(std::size_t k, const EmbeddingTable& table, const PosLexicon& lexicon) {
  return [k, &table, &lexicon](const SentenceInstance& s) { return candidate_operators(s, k, table, lexicon); };
}

CandidatePool::CandidatePool(std::span<const SentenceInstance> seed) {
  for (const auto& s : seed) add(s);
  seed_size_ = members_.size();
}

bool CandidatePool::add(SentenceInstance s) {
  if (!keys_.insert(s.key()).second) return false;
  members_.push_back(std::move(s));
  return true;
}

std::vector<SentenceInstance> CandidatePool::generated() const {
  return {members_.begin() + static_cast<std::ptrdiff_t>(seed_size_), members_.end()};
}

SearchOutcome hill_climb(const SentenceInstance& initial, const Heuristic& heuristic, std::size_t depth,
                         const OperatorProvider& operators, Rng& rng) {
  SearchOutcome out{initial, heuristic(initial), 0, false};
  std::vector<double> values;
  std::vector<std::size_t> best;
  for (std::size_t step = 0; step < depth; ++step) {
    const auto ops = operators(out.state);
    if (ops.empty()) {
      out.starved = step == 0;
      break;
    }
    std::vector<SentenceInstance> neighbors;
    neighbors.reserve(ops.size());
    values.clear();
    for (const auto& op : ops) {
      neighbors.push_back(substitute(out.state, op));
      values.push_back(heuristic(neighbors.back()));
    }
    const double top = *std::max_element(values.begin(), values.end());
    if (top < out.value) break;
    best.clear();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i] == top) best.push_back(i);
    }
    out.state = std::move(neighbors[best[rng.index(best.size())]]);
    out.value = top;
    out.steps = step + 1;
  }
  return out;
}

SearchOutcome beam_search(const SentenceInstance& initial, const Heuristic& heuristic, std::size_t depth,
                          std::size_t width, const OperatorProvider& operators, Rng& rng) {
  struct Scored {
    SentenceInstance state;
    double value;
    std::uint64_t tie;
  };
  std::vector<SentenceInstance> beam{initial};
  std::unordered_set<std::string> visited{initial.key()};
  std::optional<SearchOutcome> best;

  for (std::size_t level = 1; level <= depth; ++level) {
    std::vector<Scored> children;
    for (const auto& state : beam) {
      for (const auto& op : operators(state)) {
        SentenceInstance child = substitute(state, op);
        if (!visited.insert(child.key()).second) continue;
        const double v = heuristic(child);
        children.push_back({std::move(child), v, 0});
      }
    }
    if (children.empty()) break;
    for (auto& c : children) c.tie = rng.next();
    std::sort(children.begin(), children.end(), [](const Scored& a, const Scored& b) {
      return a.value != b.value ? a.value > b.value : a.tie < b.tie;
    });
    if (children.size() > width) children.resize(width);
    if (!best || children.front().value > best->value) {
      best = SearchOutcome{children.front().state, children.front().value, level, false};
    }
    beam.clear();
    for (auto& c : children) beam.push_back(std::move(c.state));
  }
  if (!best) return SearchOutcome{initial, heuristic(initial), 0, true};
  return *best;
}

PartialSynthesis stochastic_synthesis_partial(std::span<const SentenceInstance> seed, std::size_t count,
                                              std::size_t max_retries, const OperatorProvider& operators, Rng& rng,
                                              IdGenerator& ids) {
  if (seed.empty()) throw InvalidArgument("seed set is empty");
  CandidatePool pool(seed);
  PartialSynthesis out;
  while (pool.generated_size() < count) {
    if (!stochastic_step(pool, max_retries, operators, rng, ids)) {
      out.starved = true;
      break;
    }
  }
  out.instances = pool.generated();
  return out;
}

std::vector<SentenceInstance> stochastic_synthesis(std::span<const SentenceInstance> seed, std::size_t count,
                                                   std::size_t max_retries, const OperatorProvider& operators,
                                                   Rng& rng, IdGenerator& ids) {
  auto result = stochastic_synthesis_partial(seed, count, max_retries, operators, rng, ids);
  if (result.starved) {
    throw SynthesisStarvation("stochastic synthesis starved after " + std::to_string(result.instances.size()) +
                              " of " + std::to_string(count) + " instances: no operator yields a new sentence");
  }
  return std::move(result.instances);
}

std::vector<SentenceInstance> search_synthesis(std::span<const SentenceInstance> seed, const SynthesisConfig& config,
                                               const Heuristic& heuristic, const OperatorProvider& operators,
                                               Rng& rng, IdGenerator& ids) {
  if (seed.empty()) throw InvalidArgument("seed set is empty");
  CandidatePool pool(seed);
  const bool beam = config.method == Method::UncertaintyBeam;
  const Heuristic flat = [](const SentenceInstance&) { return 0.0; };
  const Heuristic& h = config.method == Method::StochasticHillClimb ? flat : heuristic;

  std::size_t failures = 0;
  while (pool.generated_size() < config.count) {
    const SentenceInstance& base = pool[rng.index(pool.size())];
    const auto depth = static_cast<std::size_t>(rng.uniform_int(config.depth_min, config.depth_max));
    SearchOutcome result = beam ? beam_search(base, h, depth, config.beam_width, operators, rng)
                                : hill_climb(base, h, depth, operators, rng);
    if (!result.starved && result.steps > 0 && !pool.contains(result.state)) {
      result.state.id = ids.next();
      pool.add(std::move(result.state));
      failures = 0;
      continue;
    }
    if (++failures > config.max_retries) {
      if (!stochastic_step(pool, config.max_retries, operators, rng, ids)) {
        throw SynthesisStarvation("search synthesis starved after " + std::to_string(pool.generated_size()) +
                                  " of " + std::to_string(config.count) +
                                  " instances: no operator yields a new sentence");
      }
      failures = 0;
    }
  }
  return pool.generated();
}

std::vector<SentenceInstance> synthesize(std::span<const SentenceInstance> seed, const SynthesisConfig& config,
                                         const Heuristic& heuristic, const OperatorProvider& operators, Rng& rng,
                                         IdGenerator& ids) {
  if (config.method == Method::StochasticMQ) {
    return stochastic_synthesis(seed, config.count, config.max_retries, operators, rng, ids);
  }
  return search_synthesis(seed, config, heuristic, operators, rng, ids);
}

MembershipQuery to_query(const SentenceInstance& s, double heuristic_value) {
  return {s.id, s.text, s.provenance.root_id, s.provenance.root_label, s.provenance.chain, heuristic_value};
}

std::string to_json_line(const MembershipQuery& q) {
  nlohmann::ordered_json j;
  j["id"] = q.id;
  j["text"] = q.text;
  j["root_id"] = q.root_id;
  j["root_label"] = q.root_label ? nlohmann::ordered_json(*q.root_label) : nlohmann::ordered_json(nullptr);
  auto chain = nlohmann::ordered_json::array();
  for (const auto& op : q.chain) {
    nlohmann::ordered_json step;
    step["position"] = op.position;
    step["original"] = op.original;
    step["replacement"] = op.replacement;
    step["distance"] = op.distance;
    chain.push_back(std::move(step));
  }
  j["chain"] = std::move(chain);
  j["heuristic_value"] = q.heuristic_value;
  return j.dump();
}

void write_jsonl(std::ostream& out, std::span<const MembershipQuery> queries) {
  for (const auto& q : queries) out << to_json_line(q) << '\n';
}

std::vector<MembershipQuery> read_jsonl(std::istream& in) {
  std::vector<MembershipQuery> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MembershipQuery q;
      q.id = j.at("id").get<std::string>();
      q.text = j.at("text").get<std::string>();
      q.root_id = j.at("root_id").get<std::string>();
      if (!j.at("root_label").is_null()) q.root_label = j.at("root_label").get<int>();
      for (const auto& step : j.at("chain")) {
        q.chain.push_back({step.at("position").get<std::size_t>(), step.at("original").get<std::string>(),
                           step.at("replacement").get<std::string>(), step.at("distance").get<double>()});
      }
      q.heuristic_value = j.at("heuristic_value").get<double>();
      out.push_back(std::move(q));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("jsonl", line_no, e.what());
    }
  }
  return out;
}

}  // namespace tmq
