#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tmq {

class EmbeddingTable;

/// Coarse tagset. Only NOUN, VERB and ADJ tokens are replaceable.
enum class PosTag { Noun, Verb, Adj, Adv, Pron, Det, Prep, Conj, Num, Punct, Other };

std::string_view to_string(PosTag tag);
std::optional<PosTag> parse_pos_tag(std::string_view name);
bool is_replaceable(PosTag tag);

struct Token {
  std::string surface;
  std::string normalized;
  PosTag pos = PosTag::Other;
  bool replaceable = false;

  bool operator==(const Token&) const = default;
};

/// Replace the token at `position` by `replacement` (normalized form).
struct ModOp {
  std::size_t position = 0;
  std::string original;  // surface form being replaced
  std::string replacement;
  double distance = 0.0;

  bool operator==(const ModOp&) const = default;
};

/// Witness that an instance lies in the closure of the core set.
struct ProvenanceRecord {
  std::string root_id;
  std::optional<int> root_label;
  std::vector<ModOp> chain;
};

struct SentenceInstance {
  std::vector<Token> tokens;
  std::string text;
  std::string id;
  ProvenanceRecord provenance;

  /// Key used for set membership: lowercased text.
  std::string key() const;
  std::vector<PosTag> tags() const;
};

/// Thread-safe source of unique instance ids ("<prefix><n>").
class IdGenerator {
 public:
  explicit IdGenerator(std::string prefix = "mq") : prefix_(std::move(prefix)) {}
  std::string next() { return prefix_ + std::to_string(counter_.fetch_add(1) + 1); }

 private:
  std::string prefix_;
  std::atomic<std::uint64_t> counter_{0};
};

struct TagFrequency {
  PosTag tag;
  double frequency;
};

/// Word -> ranked tag distribution, plus suffix fallbacks for unknown words.
class PosLexicon {
 public:
  PosLexicon() = default;

  /// Frequencies are normalized to sum to one; the list is sorted descending.
  void add(std::string_view word, std::vector<TagFrequency> tags);
  void add_suffix_rule(std::string suffix, PosTag tag);

  bool contains(std::string_view word) const;
  /// Most frequent tag for a known word.
  std::optional<PosTag> dominant(std::string_view word) const;
  const std::vector<TagFrequency>* tags(std::string_view word) const;
  /// Lexicon tag, else first matching suffix rule, else OTHER.
  PosTag tag_word(std::string_view word) const;

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<std::pair<std::string, PosTag>>& suffix_rules() const noexcept { return suffixes_; }

 private:
  std::unordered_map<std::string, std::vector<TagFrequency>> entries_;
  std::vector<std::pair<std::string, PosTag>> suffixes_;
};

/// `word<TAB>tag:freq[,tag:freq...]`; optional suffix file `suffix<TAB>tag`.
PosLexicon load_pos_lexicon(const std::filesystem::path& lexicon,
                            const std::optional<std::filesystem::path>& suffix_rules = std::nullopt);

/// Whitespace split, then leading/trailing punctuation split off as PUNCT tokens.
/// Throws InvalidArgument on blank input.
std::vector<Token> tokenize(std::string_view text);

std::string detokenize(const std::vector<Token>& tokens);

std::vector<Token> tag_pos(std::vector<Token> tokens, const PosLexicon& lexicon);

/// Tokenize + tag a core-set sentence; provenance root is the instance itself.
SentenceInstance make_instance(std::string_view text, const PosLexicon& lexicon, std::string id,
                               std::optional<int> label = std::nullopt);

/// Substitution operators for every replaceable in-vocabulary token whose
/// neighbor keeps the slot's tag, is known to the lexicon and differs from
/// the original. Sorted by (position, distance).
std::vector<ModOp> candidate_operators(const SentenceInstance& sentence, std::size_t k,
                                       const EmbeddingTable& table, const PosLexicon& lexicon);

/// Applies `op`, leaving the id empty. Throws InvalidArgument on bad ops.
SentenceInstance substitute(const SentenceInstance& sentence, const ModOp& op);

/// substitute() plus a fresh id.
SentenceInstance apply_op(const SentenceInstance& sentence, const ModOp& op, IdGenerator& ids);

/// Replays a provenance chain from its root; returns the resulting text.
std::string replay(const SentenceInstance& root, const std::vector<ModOp>& chain);

}  // namespace tmq
