#include "tmq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tmq/errors.hpp"
#include "tmq/learner.hpp"
#include "tmq/rng.hpp"

namespace tmq {

namespace {

using SparseRow = std::vector<std::size_t>;

std::vector<std::string> bow_words(const std::vector<Token>& tokens) {
  std::vector<std::string> words;
  for (const auto& t : tokens) {
    if (t.pos != PosTag::Punct) words.push_back(t.normalized);
  }
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

double score_words(const BowOracleModel& m, const std::vector<std::string>& words) {
  double z = m.bias;
  for (const auto& w : words) {
    auto it = m.vocabulary.find(w);
    if (it != m.vocabulary.end()) z += m.weights[it->second];
  }
  return sigmoid(z);
}

struct SparseFit {
  std::vector<double> weights;
  double bias = 0.0;
};

SparseFit fit(const std::vector<SparseRow>& rows, const std::vector<int>& labels, std::span<const std::size_t> use,
              std::size_t vocab_size, const OracleOptions& opt) {
  SparseFit m;
  m.weights.assign(vocab_size, 0.0);
  std::vector<double> grad(vocab_size);
  const double inv_n = 1.0 / static_cast<double>(use.size());
  for (std::size_t epoch = 0; epoch < opt.max_epochs; ++epoch) {
    for (std::size_t j = 0; j < vocab_size; ++j) grad[j] = opt.l2 * m.weights[j];
    double grad_b = 0.0;
    for (std::size_t i : use) {
      double z = m.bias;
      for (std::size_t f : rows[i]) z += m.weights[f];
      const double r = (sigmoid(z) - labels[i]) * inv_n;
      for (std::size_t f : rows[i]) grad[f] += r;
      grad_b += r;
    }
    double norm = std::abs(grad_b);
    for (double g : grad) norm = std::max(norm, std::abs(g));
    if (norm < opt.tolerance) break;
    for (std::size_t j = 0; j < vocab_size; ++j) m.weights[j] -= opt.learning_rate * grad[j];
    m.bias -= opt.learning_rate * grad_b;
  }
  return m;
}

}  // namespace

double BowOracleModel::probability(std::string_view text) const {
  return score_words(*this, bow_words(tokenize(text)));
}

double BowOracleModel::probability(const SentenceInstance& s) const { return score_words(*this, bow_words(s.tokens)); }

BowOracleModel train_simulated_oracle(std::span<const LabeledText> corpus, std::uint64_t seed,
                                      const OracleOptions& options) {
  std::size_t positives = 0;
  for (const auto& r : corpus) {
    if (r.label != 0 && r.label != 1) throw InvalidArgument("oracle labels must be 0 or 1");
    positives += static_cast<std::size_t>(r.label);
  }
  if (positives == 0 || positives == corpus.size()) {
    throw InvalidArgument("simulated oracle needs both classes in the corpus");
  }

  BowOracleModel model;
  std::vector<SparseRow> rows;
  std::vector<int> labels;
  rows.reserve(corpus.size());
  for (const auto& r : corpus) {
    SparseRow row;
    for (auto& w : bow_words(tokenize(r.text))) {
      auto [it, inserted] = model.vocabulary.try_emplace(std::move(w), model.vocabulary.size());
      row.push_back(it->second);
    }
    rows.push_back(std::move(row));
    labels.push_back(r.label);
  }
  const std::size_t vocab = model.vocabulary.size();

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  const std::size_t folds = std::max<std::size_t>(2, std::min(options.folds, corpus.size()));
  std::size_t correct = 0;
  for (std::size_t fold = 0; fold < folds; ++fold) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < order.size(); ++i) (i % folds == fold ? test_idx : train_idx).push_back(order[i]);
    if (train_idx.empty()) continue;
    const SparseFit f = fit(rows, labels, train_idx, vocab, options);
    for (std::size_t i : test_idx) {
      double z = f.bias;
      for (std::size_t w : rows[i]) z += f.weights[w];
      correct += static_cast<std::size_t>((sigmoid(z) >= 0.5 ? 1 : 0) == labels[i]);
    }
  }
  model.cv_accuracy = static_cast<double>(correct) / static_cast<double>(corpus.size());

  std::vector<std::size_t> all(corpus.size());
  std::iota(all.begin(), all.end(), 0);
  SparseFit full = fit(rows, labels, all, vocab, options);
  model.weights = std::move(full.weights);
  model.bias = full.bias;
  return model;
}

namespace {

OracleAnswer answer_for(double p) {
  return {p >= 0.5 ? 1 : 0, OracleSource::Simulated, std::abs(2.0 * p - 1.0)};
}

}  // namespace

OracleAnswer oracle_label(const BowOracleModel& oracle, const SentenceInstance& s) {
  return answer_for(oracle.probability(s));
}

OracleAnswer oracle_label(const BowOracleModel& oracle, std::string_view text) {
  return answer_for(oracle.probability(text));
}

std::string HumanOracleQueue::enqueue(const SentenceInstance& s) {
  std::lock_guard lock(mutex_);
  if (s.id.empty()) throw InvalidArgument("cannot enqueue an instance without an id");
  if (entries_.try_emplace(s.id, Entry{s, std::nullopt}).second) order_.push_back(s.id);
  return s.id;
}

OracleAnswer HumanOracleQueue::resolve(const std::string& handle, int label) {
  if (label != 0 && label != 1) throw InvalidArgument("label must be 0 or 1");
  std::lock_guard lock(mutex_);
  auto it = entries_.find(handle);
  if (it == entries_.end()) throw NotFound("unknown query handle '" + handle + "'");
  auto& answer = it->second.answer;
  if (answer) {
    if (answer->label != label) {
      throw Conflict("query '" + handle + "' already labeled " + std::to_string(answer->label));
    }
    return *answer;
  }
  answer = OracleAnswer{label, OracleSource::Human, std::nullopt};
  return *answer;
}

bool HumanOracleQueue::contains(const std::string& handle) const {
  std::lock_guard lock(mutex_);
  return entries_.contains(handle);
}

bool HumanOracleQueue::resolved(const std::string& handle) const { return answer(handle).has_value(); }

std::optional<OracleAnswer> HumanOracleQueue::answer(const std::string& handle) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(handle);
  if (it == entries_.end()) return std::nullopt;
  return it->second.answer;
}

std::vector<std::string> HumanOracleQueue::pending() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& h : order_) {
    if (!entries_.at(h).answer) out.push_back(h);
  }
  return out;
}

std::size_t HumanOracleQueue::size() const {
  std::lock_guard lock(mutex_);
  return order_.size();
}

}  // namespace tmq
