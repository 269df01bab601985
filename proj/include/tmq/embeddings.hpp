#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tmq {

/// A word and its semantic distance from some query word.
struct Neighbor {
  std::string word;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

/// N(w, k): the k words closest to `query`, ascending by distance, ties by word.
struct SemanticNeighborhood {
  std::string query;
  std::size_t k = 0;
  std::vector<Neighbor> neighbors;
};

struct LoadOptions {
  /// Keep only the first `max_words` records (files are usually frequency-sorted).
  std::optional<std::size_t> max_words;
};

/// Immutable word-vector store answering cosine-distance queries.
///
/// Lookups are case-insensitive. k-NN is an exact scan over the vocabulary;
/// results are memoized per (word, k) and the cache is safe to fill from
/// concurrent readers.
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t dimension, std::vector<std::string> words,
                 std::vector<double> flat_vectors);

  EmbeddingTable(const EmbeddingTable&) = delete;
  EmbeddingTable& operator=(const EmbeddingTable&) = delete;
  EmbeddingTable(EmbeddingTable&&) noexcept;
  EmbeddingTable& operator=(EmbeddingTable&&) noexcept;
  ~EmbeddingTable();

  std::size_t dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return words_.size(); }
  bool contains(std::string_view word) const;

  /// Vocabulary in file order (normalized).
  std::span<const std::string> words() const noexcept { return words_; }

  /// Vector for `word`; throws OutOfVocabulary.
  std::span<const double> vector(std::string_view word) const;
  /// Vector for `word` or an empty span when absent.
  std::span<const double> find(std::string_view word) const;

  /// 1 - cosine similarity, in [0, 2]; throws OutOfVocabulary.
  double distance(std::string_view a, std::string_view b) const;

  /// The k nearest other words; throws OutOfVocabulary, InvalidArgument for k == 0.
  const SemanticNeighborhood& nearest(std::string_view word, std::size_t k) const;

 private:
  std::ptrdiff_t index_of(std::string_view word) const;
  double distance_at(std::size_t a, std::size_t b) const;

  std::size_t dimension_;
  std::vector<std::string> words_;
  std::vector<double> vectors_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;

  struct Cache;
  std::unique_ptr<Cache> cache_;
};

/// Reads `word f1 ... fd` lines, with an optional leading `V d` header.
/// Throws ParseError naming the offending line.
EmbeddingTable load_embeddings(const std::filesystem::path& path, const LoadOptions& options = {});

double semantic_distance(std::string_view a, std::string_view b, const EmbeddingTable& table);

SemanticNeighborhood k_nearest(std::string_view word, std::size_t k, const EmbeddingTable& table);

/// ASCII lowercase; other bytes (UTF-8 continuation etc.) pass through.
std::string normalize_word(std::string_view word);

}  // namespace tmq
