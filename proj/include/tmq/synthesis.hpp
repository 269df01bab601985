#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tmq/rng.hpp"
#include "tmq/text.hpp"

namespace tmq {

/// Query-synthesis strategies.
///  S-MQ      one random operator per step (stochastic synthesis)
///  US-HC-MQ  hill climbing on learner uncertainty
///  US-BS-MQ  beam search on learner uncertainty
///  S-HC-MQ   hill climbing on a flat heuristic, i.e. a random walk
enum class Method { StochasticMQ, UncertaintyHillClimb, UncertaintyBeam, StochasticHillClimb };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view name);

struct SynthesisConfig {
  std::size_t count = 20;  // K, number of new instances
  Method method = Method::UncertaintyHillClimb;
  std::size_t k_neighbors = 10;
  int depth_min = 1;  // search depth ~ Uniform{depth_min..depth_max}
  int depth_max = 7;
  std::size_t beam_width = 3;
  std::size_t max_retries = 10;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument when an invariant is violated.
  void validate() const;
};

using OperatorProvider = std::function<std::vector<ModOp>(const SentenceInstance&)>;
using Heuristic = std::function<double(const SentenceInstance&)>;

OperatorProvider embedding_operators(std::size_t k, const EmbeddingTable& table, const PosLexicon& lexicon);

/// Omega: instances keyed by normalized text; the seed part is never returned.
class CandidatePool {
 public:
  explicit CandidatePool(std::span<const SentenceInstance> seed);

  bool contains(const SentenceInstance& s) const { return keys_.contains(s.key()); }
  /// Inserts if the text is new.
  bool add(SentenceInstance s);

  std::size_t size() const noexcept { return members_.size(); }
  std::size_t seed_size() const noexcept { return seed_size_; }
  std::size_t generated_size() const noexcept { return members_.size() - seed_size_; }
  const SentenceInstance& operator[](std::size_t i) const { return members_[i]; }

  /// Omega \ seed, in insertion order.
  std::vector<SentenceInstance> generated() const;

 private:
  std::vector<SentenceInstance> members_;
  std::unordered_set<std::string> keys_;
  std::size_t seed_size_ = 0;
};

struct SearchOutcome {
  SentenceInstance state;
  double value = 0.0;
  std::size_t steps = 0;
  bool starved = false;  // no operator applied at all
};

/// Steepest ascent with sideways moves; returns the final state.
SearchOutcome hill_climb(const SentenceInstance& initial, const Heuristic& heuristic, std::size_t depth,
                         const OperatorProvider& operators, Rng& rng);

/// Level-wise beam; returns the best non-initial state seen at any level.
SearchOutcome beam_search(const SentenceInstance& initial, const Heuristic& heuristic, std::size_t depth,
                          std::size_t width, const OperatorProvider& operators, Rng& rng);

struct PartialSynthesis {
  std::vector<SentenceInstance> instances;
  bool starved = false;
};

/// Stochastic synthesis that stops early instead of throwing when starved.
PartialSynthesis stochastic_synthesis_partial(std::span<const SentenceInstance> seed, std::size_t count,
                                              std::size_t max_retries, const OperatorProvider& operators, Rng& rng,
                                              IdGenerator& ids);

/// Random base, random operator, until `count` new instances exist.
/// Throws SynthesisStarvation after |Omega| * max_retries consecutive failures.
std::vector<SentenceInstance> stochastic_synthesis(std::span<const SentenceInstance> seed, std::size_t count,
                                                   std::size_t max_retries, const OperatorProvider& operators,
                                                   Rng& rng, IdGenerator& ids);

/// Random base, random depth, local search, until `count` new instances exist.
/// Duplicates are retried max_retries times before one stochastic step is taken.
std::vector<SentenceInstance> search_synthesis(std::span<const SentenceInstance> seed, const SynthesisConfig& config,
                                               const Heuristic& heuristic, const OperatorProvider& operators,
                                               Rng& rng, IdGenerator& ids);

/// Dispatches on config.method.
std::vector<SentenceInstance> synthesize(std::span<const SentenceInstance> seed, const SynthesisConfig& config,
                                         const Heuristic& heuristic, const OperatorProvider& operators, Rng& rng,
                                         IdGenerator& ids);

/// One generated query as written to the JSON-lines output.
struct MembershipQuery {
  std::string id;
  std::string text;
  std::string root_id;
  std::optional<int> root_label;
  std::vector<ModOp> chain;
  double heuristic_value = 0.0;
};

MembershipQuery to_query(const SentenceInstance& s, double heuristic_value);

/// `{id, text, root_id, root_label, chain:[{position, original, replacement, distance}], heuristic_value}`
std::string to_json_line(const MembershipQuery& q);
void write_jsonl(std::ostream& out, std::span<const MembershipQuery> queries);
std::vector<MembershipQuery> read_jsonl(std::istream& in);

}  // namespace tmq
