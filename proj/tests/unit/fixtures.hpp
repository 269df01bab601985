#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "tmq/embeddings.hpp"
#include "tmq/experiments.hpp"
#include "tmq/text.hpp"

namespace fixtures {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(TMQ_DATA_DIR) / name; }

struct Bundled {
  tmq::EmbeddingTable table;
  tmq::PosLexicon lexicon;
  tmq::SynonymLexicon synonyms;

  tmq::Resources resources() const { return {table, lexicon, &synonyms}; }
};

/// Bundled embeddings, lexicon and thesaurus, loaded once per test binary.
inline const Bundled& bundled() {
  static const Bundled b{tmq::load_embeddings(data_path("embeddings.txt")),
                         tmq::load_pos_lexicon(data_path("pos_lexicon.tsv"), data_path("suffix_rules.tsv")),
                         tmq::load_synonyms(data_path("synonyms.tsv"))};
  return b;
}

inline const tmq::Dataset& polarity() {
  static const tmq::Dataset d = tmq::load_dataset(data_path("polarity.csv"), 0);
  return d;
}

inline std::filesystem::path scratch_dir() {
  auto dir = std::filesystem::temp_directory_path() / ("tmq_test_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  auto path = scratch_dir() / name;
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

/// Gaussian vectors for words w0..w{n-1}.
struct RawTable {
  std::vector<std::string> words;
  std::vector<std::vector<double>> vectors;

  tmq::EmbeddingTable build() const {
    std::vector<double> flat;
    for (const auto& v : vectors) flat.insert(flat.end(), v.begin(), v.end());
    return tmq::EmbeddingTable(vectors.front().size(), words, flat);
  }
};

inline RawTable random_table(std::size_t n, std::size_t dim, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> normal;
  RawTable t;
  for (std::size_t i = 0; i < n; ++i) {
    t.words.push_back("w" + std::to_string(i));
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(gen);
    t.vectors.push_back(std::move(v));
  }
  return t;
}

inline double raw_cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Ten training sentences covering both classes.
inline std::vector<tmq::SentenceInstance> core_set() {
  return tmq::core_instances(polarity(), 10, 7, bundled().lexicon);
}

}  // namespace fixtures
