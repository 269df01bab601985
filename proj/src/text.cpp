#include "tmq/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "tmq/embeddings.hpp"
#include "tmq/errors.hpp"

namespace tmq {

namespace {

constexpr std::array<std::pair<PosTag, std::string_view>, 11> kTagNames{{
    {PosTag::Noun, "NOUN"},
    {PosTag::Verb, "VERB"},
    {PosTag::Adj, "ADJ"},
    {PosTag::Adv, "ADV"},
    {PosTag::Pron, "PRON"},
    {PosTag::Det, "DET"},
    {PosTag::Prep, "PREP"},
    {PosTag::Conj, "CONJ"},
    {PosTag::Num, "NUM"},
    {PosTag::Punct, "PUNCT"},
    {PosTag::Other, "OTHER"},
}};

bool is_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// No space is emitted before these.
bool attaches_left(const Token& t) {
  return t.pos == PosTag::Punct && t.surface.size() == 1 &&
         std::string_view(".,!?;:'").find(t.surface[0]) != std::string_view::npos;
}

// No space is emitted after these.
bool opens(const Token& t) {
  return t.pos == PosTag::Punct && t.surface.size() == 1 &&
         std::string_view("([{`").find(t.surface[0]) != std::string_view::npos;
}

Token make_token(std::string surface, bool punct) {
  Token t;
  t.normalized = normalize_word(surface);
  t.surface = std::move(surface);
  t.pos = punct ? PosTag::Punct : PosTag::Other;
  return t;
}

std::string match_case(std::string_view like, std::string word) {
  if (!like.empty() && like[0] >= 'A' && like[0] <= 'Z' && !word.empty() && word[0] >= 'a' &&
      word[0] <= 'z') {
    word[0] = static_cast<char>(word[0] - 'a' + 'A');
  }
  return word;
}

std::string trim(std::string s) {
  while (!s.empty() && is_space(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && is_space(s[i])) ++i;
  return s.substr(i);
}

}  // namespace

std::string_view to_string(PosTag tag) {
  for (const auto& [t, name] : kTagNames) {
    if (t == tag) return name;
  }
  return "OTHER";
}

std::optional<PosTag> parse_pos_tag(std::string_view name) {
  for (const auto& [t, n] : kTagNames) {
    if (n == name) return t;
  }
  return std::nullopt;
}

bool is_replaceable(PosTag tag) { return tag == PosTag::Noun || tag == PosTag::Verb || tag == PosTag::Adj; }

std::string SentenceInstance::key() const { return normalize_word(text); }

std::vector<PosTag> SentenceInstance::tags() const {
  std::vector<PosTag> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(t.pos);
  return out;
}

void PosLexicon::add(std::string_view word, std::vector<TagFrequency> tags) {
  if (tags.empty()) throw InvalidArgument("lexicon entry without tags: " + std::string(word));
  double total = 0.0;
  for (const auto& t : tags) {
    if (!(t.frequency > 0.0)) throw InvalidArgument("non-positive tag frequency for " + std::string(word));
    total += t.frequency;
  }
  for (auto& t : tags) t.frequency /= total;
  std::stable_sort(tags.begin(), tags.end(),
                   [](const TagFrequency& a, const TagFrequency& b) { return a.frequency > b.frequency; });
  entries_[normalize_word(word)] = std::move(tags);
}

void PosLexicon::add_suffix_rule(std::string suffix, PosTag tag) {
  suffixes_.emplace_back(normalize_word(suffix), tag);
}

const std::vector<TagFrequency>* PosLexicon::tags(std::string_view word) const {
  auto it = entries_.find(normalize_word(word));
  return it == entries_.end() ? nullptr : &it->second;
}

bool PosLexicon::contains(std::string_view word) const { return tags(word) != nullptr; }

std::optional<PosTag> PosLexicon::dominant(std::string_view word) const {
  const auto* t = tags(word);
  if (!t) return std::nullopt;
  return t->front().tag;
}

PosTag PosLexicon::tag_word(std::string_view word) const {
  if (auto tag = dominant(word)) return *tag;
  const std::string w = normalize_word(word);
  for (const auto& [suffix, tag] : suffixes_) {
    if (w.size() > suffix.size() && w.ends_with(suffix)) return tag;
  }
  return PosTag::Other;
}

PosLexicon load_pos_lexicon(const std::filesystem::path& lexicon,
                            const std::optional<std::filesystem::path>& suffix_rules) {
  PosLexicon lex;
  {
    std::ifstream in(lexicon);
    if (!in) throw ParseError(lexicon.string(), 0, "cannot open POS lexicon");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw ParseError(lexicon.string(), line_no, "expected word<TAB>tags");
      const std::string word = trim(line.substr(0, tab));
      std::vector<TagFrequency> tags;
      std::istringstream list(line.substr(tab + 1));
      for (std::string item; std::getline(list, item, ',');) {
        item = trim(item);
        const auto colon = item.find(':');
        const auto tag = parse_pos_tag(item.substr(0, colon));
        if (!tag) throw ParseError(lexicon.string(), line_no, "unknown tag in '" + item + "'");
        double freq = 1.0;
        if (colon != std::string::npos) {
          try {
            freq = std::stod(item.substr(colon + 1));
          } catch (const std::exception&) {
            throw ParseError(lexicon.string(), line_no, "bad frequency in '" + item + "'");
          }
        }
        tags.push_back({*tag, freq});
      }
      if (word.empty() || tags.empty()) throw ParseError(lexicon.string(), line_no, "empty entry");
      try {
        lex.add(word, std::move(tags));
      } catch (const InvalidArgument& e) {
        throw ParseError(lexicon.string(), line_no, e.what());
      }
    }
  }
  if (suffix_rules) {
    std::ifstream in(*suffix_rules);
    if (!in) throw ParseError(suffix_rules->string(), 0, "cannot open suffix rules");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (trim(line).empty()) continue;
      const auto tab = line.find('\t');
      const auto tag = tab == std::string::npos ? std::nullopt : parse_pos_tag(trim(line.substr(tab + 1)));
      if (!tag) throw ParseError(suffix_rules->string(), line_no, "expected suffix<TAB>tag");
      lex.add_suffix_rule(trim(line.substr(0, tab)), *tag);
    }
  }
  return lex;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (start == i) break;
    std::string_view chunk = text.substr(start, i - start);

    std::size_t lead = 0;
    while (lead < chunk.size() && is_punct(chunk[lead])) ++lead;
    if (lead == chunk.size()) {
      for (char c : chunk) tokens.push_back(make_token(std::string(1, c), true));
      continue;
    }
    std::size_t trail = chunk.size();
    while (trail > lead && is_punct(chunk[trail - 1])) --trail;

    for (std::size_t j = 0; j < lead; ++j) tokens.push_back(make_token(std::string(1, chunk[j]), true));
    tokens.push_back(make_token(std::string(chunk.substr(lead, trail - lead)), false));
    for (std::size_t j = trail; j < chunk.size(); ++j) {
      tokens.push_back(make_token(std::string(1, chunk[j]), true));
    }
  }
  if (tokens.empty()) throw InvalidArgument("cannot tokenize empty or whitespace-only text");
  return tokens;
}

std::string detokenize(const std::vector<Token>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && !attaches_left(tokens[i]) && !opens(tokens[i - 1])) out.push_back(' ');
    out += tokens[i].surface;
  }
  return out;
}

std::vector<Token> tag_pos(std::vector<Token> tokens, const PosLexicon& lexicon) {
  for (auto& t : tokens) {
    if (t.pos != PosTag::Punct) t.pos = lexicon.tag_word(t.normalized);
    t.replaceable = is_replaceable(t.pos);
  }
  return tokens;
}

SentenceInstance make_instance(std::string_view text, const PosLexicon& lexicon, std::string id,
                               std::optional<int> label) {
  SentenceInstance s;
  s.tokens = tag_pos(tokenize(text), lexicon);
  s.text = detokenize(s.tokens);
  s.id = std::move(id);
  s.provenance.root_id = s.id;
  s.provenance.root_label = label;
  return s;
}

std::vector<ModOp> candidate_operators(const SentenceInstance& sentence, std::size_t k,
                                       const EmbeddingTable& table, const PosLexicon& lexicon) {
  std::vector<ModOp> ops;
  for (std::size_t pos = 0; pos < sentence.tokens.size(); ++pos) {
    const Token& tok = sentence.tokens[pos];
    if (!tok.replaceable || !table.contains(tok.normalized)) continue;
    for (const auto& n : table.nearest(tok.normalized, k).neighbors) {
      if (n.word == tok.normalized) continue;
      const auto tag = lexicon.dominant(n.word);
      if (!tag || *tag != tok.pos) continue;
      ops.push_back({pos, tok.surface, n.word, n.distance});
    }
  }
  return ops;
}

SentenceInstance substitute(const SentenceInstance& sentence, const ModOp& op) {
  if (op.position >= sentence.tokens.size()) {
    throw InvalidArgument("operator position " + std::to_string(op.position) + " out of range");
  }
  const Token& old = sentence.tokens[op.position];
  const std::string replacement = normalize_word(op.replacement);
  if (replacement.empty() || replacement == old.normalized) {
    throw InvalidArgument("replacement '" + op.replacement + "' equals the original token");
  }
  SentenceInstance out;
  out.tokens = sentence.tokens;
  Token& slot = out.tokens[op.position];
  slot.surface = match_case(old.surface, replacement);
  slot.normalized = replacement;
  out.text = detokenize(out.tokens);
  out.provenance = sentence.provenance;
  ModOp recorded = op;
  recorded.original = old.surface;
  recorded.replacement = replacement;
  out.provenance.chain.push_back(std::move(recorded));
  return out;
}

SentenceInstance apply_op(const SentenceInstance& sentence, const ModOp& op, IdGenerator& ids) {
  SentenceInstance out = substitute(sentence, op);
  out.id = ids.next();
  return out;
}

std::string replay(const SentenceInstance& root, const std::vector<ModOp>& chain) {
  SentenceInstance current = root;
  for (const auto& op : chain) {
    if (op.position < current.tokens.size() && current.tokens[op.position].surface != op.original) {
      throw InvalidArgument("chain step expects '" + op.original + "' at position " +
                            std::to_string(op.position));
    }
    current = substitute(current, op);
  }
  return current.text;
}

}  // namespace tmq
