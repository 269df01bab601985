#include "tmq/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "tmq/embeddings.hpp"
#include "tmq/errors.hpp"

namespace tmq {

namespace {

constexpr const char* kModelMagic = "TMQ-LINEAR-MODEL";
constexpr int kModelVersion = 1;
constexpr double kPriorClamp = 10.0;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Objective logistic_objective(std::span<const LabeledExample> data, std::span<const double> weights,
                             double bias, double l2) {
  Objective out;
  out.weight_gradient.assign(weights.size(), 0.0);
  if (data.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (const auto& ex : data) {
    const double z = dot(weights, ex.features.values) + bias;
    // -log p(y|x) = softplus(z) - y z
    out.loss += (softplus(z) - ex.label * z) * inv_n;
    const double residual = (sigmoid(z) - ex.label) * inv_n;
    for (std::size_t j = 0; j < weights.size(); ++j) out.weight_gradient[j] += residual * ex.features.values[j];
    out.bias_gradient += residual;
  }
  for (std::size_t j = 0; j < weights.size(); ++j) {
    out.loss += 0.5 * l2 * weights[j] * weights[j];
    out.weight_gradient[j] += l2 * weights[j];
  }
  return out;
}

FeatureVector featurize(const SentenceInstance& sentence, const EmbeddingTable& table) {
  FeatureVector out;
  out.values.assign(table.dimension(), 0.0);
  std::size_t count = 0;
  for (const auto& tok : sentence.tokens) {
    if (tok.pos == PosTag::Punct) continue;
    auto v = table.find(tok.normalized);
    if (v.empty()) continue;
    for (std::size_t j = 0; j < v.size(); ++j) out.values[j] += v[j];
    ++count;
  }
  if (count > 0) {
    for (auto& x : out.values) x /= static_cast<double>(count);
  }
  return out;
}

LinearModel train(std::span<const LabeledExample> data, const TrainOptions& options) {
  if (data.empty()) throw InvalidArgument("cannot train on an empty set");
  const std::size_t dim = data.front().features.values.size();
  std::size_t positives = 0;
  for (const auto& ex : data) {
    if (ex.features.values.size() != dim) throw InvalidArgument("inconsistent feature dimensions");
    if (ex.label != 0 && ex.label != 1) throw InvalidArgument("labels must be 0 or 1");
    positives += static_cast<std::size_t>(ex.label);
  }

  LinearModel model;
  model.weights.assign(dim, 0.0);
  model.meta.l2 = options.l2;

  if (positives == 0 || positives == data.size()) {
    const double rate = static_cast<double>(positives) / static_cast<double>(data.size());
    const double logit = rate <= 0.0 ? -kPriorClamp : rate >= 1.0 ? kPriorClamp : std::log(rate / (1 - rate));
    model.bias = std::clamp(logit, -kPriorClamp, kPriorClamp);
    return model;
  }

  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    Objective obj = logistic_objective(data, model.weights, model.bias, options.l2);
    double norm = std::abs(obj.bias_gradient);
    for (double g : obj.weight_gradient) norm = std::max(norm, std::abs(g));
    model.meta.gradient_norm = norm;
    if (norm < options.tolerance) break;
    for (std::size_t j = 0; j < dim; ++j) model.weights[j] -= options.learning_rate * obj.weight_gradient[j];
    model.bias -= options.learning_rate * obj.bias_gradient;
    model.meta.epochs = epoch + 1;
  }
  return model;
}

double predict_proba(const LinearModel& model, const FeatureVector& x) {
  if (x.values.size() != model.weights.size()) {
    throw InvalidArgument("feature dimension " + std::to_string(x.values.size()) +
                          " does not match model dimension " + std::to_string(model.weights.size()));
  }
  return sigmoid(dot(model.weights, x.values) + model.bias);
}

double uncertainty_from_probability(double p) { return 1.0 - std::abs(2.0 * p - 1.0); }

double uncertainty(const LinearModel& model, const SentenceInstance& sentence, const EmbeddingTable& table) {
  return uncertainty_from_probability(predict_proba(model, featurize(sentence, table)));
}

bool id_less(const std::string& a, const std::string& b) {
  auto split = [](const std::string& s) {
    std::size_t i = s.size();
    while (i > 0 && s[i - 1] >= '0' && s[i - 1] <= '9') --i;
    return i;
  };
  const std::size_t ia = split(a), ib = split(b);
  const std::string_view pa(a.data(), ia), pb(b.data(), ib);
  if (pa != pb) return pa < pb;
  std::string_view na(a.data() + ia, a.size() - ia), nb(b.data() + ib, b.size() - ib);
  while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
  while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
  if (na.size() != nb.size()) return na.size() < nb.size();
  if (na != nb) return na < nb;
  return a < b;
}

std::vector<SentenceInstance> select_batch(const std::vector<SentenceInstance>& pool, const LinearModel& model,
                                           std::size_t m, const EmbeddingTable& table) {
  if (pool.empty()) throw InvalidArgument("cannot select from an empty pool");
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) scored.emplace_back(uncertainty(model, pool[i], table), i);
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return id_less(pool[a.second].id, pool[b.second].id);
  });
  std::vector<SentenceInstance> out;
  const std::size_t take = std::min(m, pool.size());
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(pool[scored[i].second]);
  return out;
}

void save_model(const LinearModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model checkpoint " + path.string());
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << std::hexfloat;
  out << model.weights.size() << '\n';
  for (double w : model.weights) out << w << '\n';
  out << model.bias << '\n';
  out << model.meta.epochs << ' ' << model.meta.gradient_norm << ' ' << model.meta.l2 << '\n';
  if (!out) throw Error("failed writing model checkpoint " + path.string());
}

LinearModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open model checkpoint");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kModelMagic) throw ParseError(path.string(), 1, "not a model checkpoint");
  if (version != kModelVersion) throw ParseError(path.string(), 1, "unsupported checkpoint version");

  // hexfloat extraction is unreliable in libstdc++, so parse tokens with strtod.
  auto read_double = [&](std::size_t line) {
    std::string tok;
    if (!(in >> tok)) throw ParseError(path.string(), line, "truncated checkpoint");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || !std::isfinite(v)) {
      throw ParseError(path.string(), line, "invalid number '" + tok + "'");
    }
    return v;
  };
  std::size_t dim = 0;
  if (!(in >> dim)) throw ParseError(path.string(), 2, "missing dimension");
  LinearModel model;
  model.weights.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) model.weights[j] = read_double(3 + j);
  model.bias = read_double(3 + dim);
  if (!(in >> model.meta.epochs)) throw ParseError(path.string(), 4 + dim, "missing training meta");
  model.meta.gradient_norm = read_double(4 + dim);
  model.meta.l2 = read_double(4 + dim);
  return model;
}

}  // namespace tmq
