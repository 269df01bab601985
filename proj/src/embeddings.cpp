#include "tmq/embeddings.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "tmq/errors.hpp"

namespace tmq {

std::string normalize_word(std::string_view word) {
  std::string out(word);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

struct EmbeddingTable::Cache {
  std::shared_mutex mutex;
  std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<SemanticNeighborhood>> entries;
};

EmbeddingTable::EmbeddingTable(std::size_t dimension, std::vector<std::string> words,
                               std::vector<double> flat_vectors)
    : dimension_(dimension), cache_(std::make_unique<Cache>()) {
  if (dimension == 0) throw InvalidArgument("embedding dimension must be positive");
  if (flat_vectors.size() != words.size() * dimension) {
    throw InvalidArgument("vector data does not match vocabulary size x dimension");
  }
  words_.reserve(words.size());
  vectors_.reserve(flat_vectors.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string key = normalize_word(words[i]);
    if (index_.contains(key)) continue;  // first occurrence wins
    const double* v = flat_vectors.data() + i * dimension;
    double sq = 0.0;
    for (std::size_t j = 0; j < dimension; ++j) sq += v[j] * v[j];
    if (!(sq > 0.0) || !std::isfinite(sq)) {
      throw InvalidArgument("zero-norm or non-finite vector for '" + words[i] + "'");
    }
    index_.emplace(key, words_.size());
    words_.push_back(std::move(key));
    vectors_.insert(vectors_.end(), v, v + dimension);
    norms_.push_back(std::sqrt(sq));
  }
  if (words_.empty()) throw InvalidArgument("empty vocabulary");
}

EmbeddingTable::EmbeddingTable(EmbeddingTable&&) noexcept = default;
EmbeddingTable& EmbeddingTable::operator=(EmbeddingTable&&) noexcept = default;
EmbeddingTable::~EmbeddingTable() = default;

std::ptrdiff_t EmbeddingTable::index_of(std::string_view word) const {
  auto it = index_.find(normalize_word(word));
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

bool EmbeddingTable::contains(std::string_view word) const { return index_of(word) >= 0; }

std::span<const double> EmbeddingTable::find(std::string_view word) const {
  auto i = index_of(word);
  if (i < 0) return {};
  return {vectors_.data() + static_cast<std::size_t>(i) * dimension_, dimension_};
}

std::span<const double> EmbeddingTable::vector(std::string_view word) const {
  auto v = find(word);
  if (v.empty()) throw OutOfVocabulary(std::string(word));
  return v;
}

double EmbeddingTable::distance_at(std::size_t a, std::size_t b) const {
  if (a == b) return 0.0;
  const double* va = vectors_.data() + a * dimension_;
  const double* vb = vectors_.data() + b * dimension_;
  double dot = 0.0;
  for (std::size_t j = 0; j < dimension_; ++j) dot += va[j] * vb[j];
  double d = 1.0 - dot / (norms_[a] * norms_[b]);
  return std::clamp(d, 0.0, 2.0);
}

double EmbeddingTable::distance(std::string_view a, std::string_view b) const {
  auto ia = index_of(a);
  if (ia < 0) throw OutOfVocabulary(std::string(a));
  auto ib = index_of(b);
  if (ib < 0) throw OutOfVocabulary(std::string(b));
  return distance_at(static_cast<std::size_t>(ia), static_cast<std::size_t>(ib));
}

const SemanticNeighborhood& EmbeddingTable::nearest(std::string_view word, std::size_t k) const {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  auto signed_idx = index_of(word);
  if (signed_idx < 0) throw OutOfVocabulary(std::string(word));
  const auto idx = static_cast<std::size_t>(signed_idx);
  const auto key = std::make_pair(idx, k);
  {
    std::shared_lock lock(cache_->mutex);
    auto it = cache_->entries.find(key);
    if (it != cache_->entries.end()) return *it->second;
  }

  std::vector<Neighbor> all;
  all.reserve(words_.size());
  for (std::size_t j = 0; j < words_.size(); ++j) {
    if (j == idx) continue;
    all.push_back({words_[j], distance_at(idx, j)});
  }
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.word < b.word;
  };
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(), closer);
  all.resize(keep);

  auto result = std::make_unique<SemanticNeighborhood>();
  result->query = words_[idx];
  result->k = k;
  result->neighbors = std::move(all);

  std::unique_lock lock(cache_->mutex);
  auto [it, inserted] = cache_->entries.try_emplace(key, std::move(result));
  return *it->second;
}

namespace {

bool parse_double(const std::string& text, double& out) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  in >> out;
  return in && in.peek() == std::char_traits<char>::eof();
}

bool is_header(const std::vector<std::string>& fields) {
  if (fields.size() != 2) return false;
  for (const auto& f : fields) {
    if (f.empty() || !std::all_of(f.begin(), f.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return false;
    }
  }
  return true;
}

}  // namespace

EmbeddingTable load_embeddings(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open embedding file");

  const std::string source = path.string();
  std::vector<std::string> words;
  std::vector<double> flat;
  std::unordered_set<std::string> seen;
  std::size_t dimension = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields_in(line);
    std::vector<std::string> fields;
    for (std::string f; fields_in >> f;) fields.push_back(std::move(f));
    if (fields.empty()) continue;

    if (first_content) {
      first_content = false;
      if (is_header(fields)) {
        dimension = std::stoul(fields[1]);
        if (dimension == 0) throw ParseError(source, line_no, "header declares dimension 0");
        continue;
      }
    }
    if (options.max_words && words.size() >= *options.max_words) break;
    if (fields.size() < 2) throw ParseError(source, line_no, "expected a word followed by values");

    const std::size_t d = fields.size() - 1;
    if (dimension == 0) dimension = d;
    if (d != dimension) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(dimension) + " values, found " + std::to_string(d));
    }
    std::vector<double> values(d);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (!parse_double(fields[j + 1], values[j]) || !std::isfinite(values[j])) {
        throw ParseError(source, line_no, "invalid value '" + fields[j + 1] + "'");
      }
      sq += values[j] * values[j];
    }
    if (sq == 0.0) throw ParseError(source, line_no, "zero-norm vector for '" + fields[0] + "'");

    std::string key = normalize_word(fields[0]);
    if (!seen.insert(key).second) continue;
    words.push_back(std::move(key));
    flat.insert(flat.end(), values.begin(), values.end());
  }
  if (words.empty()) throw ParseError(source, 0, "empty vocabulary");
  return EmbeddingTable(dimension, std::move(words), std::move(flat));
}

double semantic_distance(std::string_view a, std::string_view b, const EmbeddingTable& table) {
  return table.distance(a, b);
}

SemanticNeighborhood k_nearest(std::string_view word, std::size_t k, const EmbeddingTable& table) {
  return table.nearest(word, k);
}

}  // namespace tmq
