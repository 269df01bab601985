#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "tmq/text.hpp"

namespace tmq {

class EmbeddingTable;

/// A point in feature space: the mean word vector of a sentence.
struct FeatureVector {
  std::vector<double> values;
};

struct LabeledExample {
  FeatureVector features;
  int label = 0;  // 0 or 1
};

struct TrainOptions {
  double learning_rate = 0.1;
  double l2 = 1e-4;
  std::size_t max_epochs = 500;
  double tolerance = 1e-6;
};

struct TrainingMeta {
  std::size_t epochs = 0;
  double gradient_norm = 0.0;  // infinity norm at exit
  double l2 = 0.0;
};

/// Binary logistic regression.
struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  TrainingMeta meta;

  std::size_t dimension() const noexcept { return weights.size(); }
};

/// Value and gradient of the mean log-loss plus (l2/2)*|w|^2 (bias unpenalized).
struct Objective {
  double loss = 0.0;
  std::vector<double> weight_gradient;
  double bias_gradient = 0.0;
};

Objective logistic_objective(std::span<const LabeledExample> data, std::span<const double> weights,
                             double bias, double l2);

double sigmoid(double z);

FeatureVector featurize(const SentenceInstance& sentence, const EmbeddingTable& table);

/// Full-batch gradient descent from zero weights. With a single class present
/// returns the prior-only model. Throws InvalidArgument on empty input.
LinearModel train(std::span<const LabeledExample> data, const TrainOptions& options = {});

double predict_proba(const LinearModel& model, const FeatureVector& x);

/// Margin uncertainty 1 - |2p - 1|.
double uncertainty_from_probability(double p);
double uncertainty(const LinearModel& model, const SentenceInstance& sentence, const EmbeddingTable& table);

/// Top-m of `pool` by uncertainty, ties by id.
std::vector<SentenceInstance> select_batch(const std::vector<SentenceInstance>& pool, const LinearModel& model,
                                           std::size_t m, const EmbeddingTable& table);

/// Natural order on ids: "mq2" < "mq10".
bool id_less(const std::string& a, const std::string& b);

void save_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model(const std::filesystem::path& path);

}  // namespace tmq
