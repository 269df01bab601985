#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tmq/text.hpp"

namespace tmq {

struct LabeledText {
  std::string text;
  int label = 0;
};

struct OracleOptions {
  double learning_rate = 0.5;
  double l2 = 1e-3;
  std::size_t max_epochs = 2000;
  double tolerance = 1e-6;
  std::size_t folds = 5;
};

/// Simulated expert: logistic regression over binary bag-of-words features.
struct BowOracleModel {
  std::unordered_map<std::string, std::size_t> vocabulary;
  std::vector<double> weights;
  double bias = 0.0;
  double cv_accuracy = 0.0;

  /// P(label = 1); words outside the vocabulary are ignored.
  double probability(std::string_view text) const;
  double probability(const SentenceInstance& s) const;
};

enum class OracleSource { Simulated, Human };

struct OracleAnswer {
  int label = 0;
  OracleSource source = OracleSource::Simulated;
  std::optional<double> confidence;  // simulated answers only

  bool operator==(const OracleAnswer&) const = default;
};

/// Trains on the whole corpus and records k-fold cross-validation accuracy.
/// Throws InvalidArgument unless both classes are present.
BowOracleModel train_simulated_oracle(std::span<const LabeledText> corpus, std::uint64_t seed,
                                      const OracleOptions& options = {});

/// label = 1 iff p >= 0.5; confidence = |2p - 1|.
OracleAnswer oracle_label(const BowOracleModel& oracle, const SentenceInstance& s);
OracleAnswer oracle_label(const BowOracleModel& oracle, std::string_view text);

/// Pending questions for a human labeler. Each query is queued once;
/// resolving twice with the same label is a no-op, with a different label a Conflict.
class HumanOracleQueue {
 public:
  /// Returns the handle (the instance id); re-enqueueing returns the same handle.
  std::string enqueue(const SentenceInstance& s);
  OracleAnswer resolve(const std::string& handle, int label);

  bool contains(const std::string& handle) const;
  bool resolved(const std::string& handle) const;
  std::optional<OracleAnswer> answer(const std::string& handle) const;
  /// Unresolved handles in enqueue order.
  std::vector<std::string> pending() const;
  std::size_t size() const;

 private:
  struct Entry {
    SentenceInstance instance;
    std::optional<OracleAnswer> answer;
  };
  mutable std::mutex mutex_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, Entry> entries_;
};

}  // namespace tmq
