#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tmq/learner.hpp"
#include "tmq/oracle.hpp"
#include "tmq/synthesis.hpp"

namespace tmq {

class EmbeddingTable;

/// Pool-generation methods compared in the batch experiments.
enum class PoolMethod { StochasticMQ, UncertaintyHillClimb, UncertaintyBeam, StochasticHillClimb, Ideal, Wna };

std::string_view to_string(PoolMethod method);
std::optional<PoolMethod> parse_pool_method(std::string_view name);
/// The synthesis strategy behind an MQ method; nullopt for IDEAL and WNA.
std::optional<Method> synthesis_method(PoolMethod method);

/// `label,text` CSV rows; throws ParseError with line numbers.
std::vector<LabeledText> parse_labeled_csv(std::string_view content, const std::string& source = "csv");

struct Dataset {
  std::string name;
  std::vector<LabeledText> records;
  std::vector<std::size_t> train_ids;
  std::vector<std::size_t> test_ids;
};

/// Deduplicates texts (first wins) and splits deterministically.
/// Throws InvalidArgument for an empty split or a single-class training split.
Dataset make_dataset(std::string name, std::vector<LabeledText> records, std::uint64_t split_seed,
                     double test_fraction = 0.4);
Dataset load_dataset(const std::filesystem::path& path, std::uint64_t split_seed, double test_fraction = 0.4);

/// Unlabeled training pool with an access counter; only IDEAL may read it.
class UnlabeledPool {
 public:
  UnlabeledPool(const Dataset& dataset, std::span<const std::size_t> excluded);

  /// Remaining record ids. Every call counts as one read.
  const std::vector<std::size_t>& read() const;
  void remove(std::size_t record_id);
  std::size_t reads() const noexcept { return reads_; }

 private:
  std::vector<std::size_t> ids_;
  mutable std::size_t reads_ = 0;
};

/// Thesaurus for the WNA baseline: `word<TAB>syn1,syn2,...`.
class SynonymLexicon {
 public:
  void add(std::string_view word, std::vector<std::string> synonyms);
  const std::vector<std::string>* synonyms(std::string_view word) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
};

SynonymLexicon load_synonyms(const std::filesystem::path& path);

/// Shared read-only resources.
struct Resources {
  const EmbeddingTable& table;
  const PosLexicon& lexicon;
  const SynonymLexicon* synonyms = nullptr;
};

/// WNA operators: replace a replaceable word with a listed synonym of the same tag.
OperatorProvider synonym_operators(const SynonymLexicon& synonyms, const Resources& resources);

struct AlConfig {
  std::size_t core_size = 10;
  std::size_t pool_size = 20;  // P
  std::size_t batch_size = 5;  // m
  std::size_t steps = 8;
  std::size_t repetitions = 20;
  std::size_t switch_examples = 50;
  double test_fraction = 0.4;
  std::uint64_t seed = 0;
  SynthesisConfig synthesis;
  TrainOptions training;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t n_labeled = 0;
  std::optional<double> accuracy;
  std::optional<double> mean_uncertainty;  // of the batch just labeled
};

struct RunMetrics {
  std::string method;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  std::optional<double> switch_rate;
};

/// Uniform sample of `size` training records containing both classes when possible.
std::vector<std::size_t> sample_core(const Dataset& dataset, std::size_t size, Rng& rng);

/// The core set a repetition with `seed` uses, as tagged instances with true labels.
std::vector<SentenceInstance> core_instances(const Dataset& dataset, std::size_t size, std::uint64_t seed,
                                             const PosLexicon& lexicon, std::vector<std::size_t>* record_ids = nullptr);

/// The active-learning state shared by batch experiments and the labeling service:
/// labeled set, learner, metrics history. Pool generation for step t draws from
/// Rng::derive(seed, t), so identical inputs reproduce identical pools.
class AlSession {
 public:
  AlSession(std::vector<SentenceInstance> core, const Resources& resources, AlConfig config, std::uint64_t seed,
            std::vector<LabeledText> test_set = {});

  /// P synthesized candidates seeded by the labeled set. WNA may return fewer
  /// than P; MQ methods throw SynthesisStarvation. IDEAL is not synthesized.
  std::vector<SentenceInstance> generate_pool(PoolMethod method);

  /// Top-m of `pool` by the current learner's uncertainty.
  std::vector<SentenceInstance> select(const std::vector<SentenceInstance>& pool) const;

  /// Adds a labeled batch, retrains and appends one metrics step.
  void add_batch(const std::vector<SentenceInstance>& batch, const std::vector<int>& labels);

  double heuristic(const SentenceInstance& s) const;
  Heuristic heuristic_fn() const;

  const LinearModel& model() const noexcept { return model_; }
  std::size_t model_version() const noexcept { return history_.size() - 1; }
  const std::vector<StepRecord>& history() const noexcept { return history_; }
  const std::vector<SentenceInstance>& labeled() const noexcept { return labeled_; }
  const std::vector<int>& labels() const noexcept { return labels_; }
  const AlConfig& config() const noexcept { return config_; }
  std::size_t step() const noexcept { return history_.size() - 1; }
  IdGenerator& ids() noexcept { return ids_; }

 private:
  void retrain();
  std::optional<double> test_accuracy() const;

  Resources resources_;
  AlConfig config_;
  std::uint64_t seed_;
  std::vector<SentenceInstance> labeled_;
  std::vector<int> labels_;
  std::vector<SentenceInstance> test_instances_;
  std::vector<int> test_labels_;
  LinearModel model_;
  std::vector<StepRecord> history_;
  IdGenerator ids_{"mq"};
};

/// Experiment 1: per repetition, sample a core set, then `steps` rounds of
/// pool generation, uncertainty selection, oracle labeling and retraining.
std::vector<RunMetrics> run_batch_al(const Dataset& dataset, PoolMethod method, const AlConfig& config,
                                     const Resources& resources, const BowOracleModel& oracle,
                                     std::size_t* unlabeled_reads = nullptr);

/// Uniform sample of P ids without replacement. Throws InvalidArgument when the pool is too small.
std::vector<std::size_t> baseline_ideal(std::span<const std::size_t> unlabeled, std::size_t pool_size, Rng& rng);

/// Stochastic synthesis over synonym substitutions; partial output is flagged.
PartialSynthesis baseline_wna(std::span<const SentenceInstance> seed, const SynonymLexicon& synonyms,
                              const Resources& resources, std::size_t count, std::size_t max_retries, Rng& rng,
                              IdGenerator& ids);

struct LabelSwitchResult {
  std::vector<RunMetrics> runs;                       // one per (repetition, method)
  std::vector<std::vector<MembershipQuery>> queries;  // parallel to runs; root_label is the oracle's
};

/// Experiment 2: per repetition a fresh core set; each method generates
/// `switch_examples` instances, scored by how many change their root's oracle label.
LabelSwitchResult run_label_switch(const Dataset& dataset, std::span<const Method> methods, const AlConfig& config,
                                   const Resources& resources, const BowOracleModel& oracle);

/// Mean per-repetition switch rate for `method`.
double mean_switch_rate(std::span<const RunMetrics> runs, std::string_view method);

/// Mean accuracy at `step` over runs of `method`.
double mean_accuracy(std::span<const RunMetrics> runs, std::string_view method, std::size_t step);

/// `method,seed,step,n_labeled,accuracy` rows, or `method,seed,switch_rate`
/// when the runs carry switch rates. Throws Error when the path is unwritable.
void emit_metrics(std::span<const RunMetrics> runs, const std::filesystem::path& path);
std::string metrics_csv(std::span<const RunMetrics> runs);
std::string switch_csv(std::span<const RunMetrics> runs);

}  // namespace tmq
