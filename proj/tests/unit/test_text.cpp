#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <thread>

#include "fixtures.hpp"
#include "tmq/errors.hpp"
#include "tmq/synthesis.hpp"
#include "tmq/text.hpp"

using namespace tmq;

namespace {

std::vector<std::string> surfaces(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.surface);
  return out;
}

std::string random_text(std::mt19937& gen) {
  static const std::string alphabet = "abcdeXYZ .,!?;:'\"()[]{}`-  ";
  std::uniform_int_distribution<std::size_t> len(1, 40), pick(0, alphabet.size() - 1);
  std::string s;
  const std::size_t n = len(gen);
  for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[pick(gen)]);
  if (std::all_of(s.begin(), s.end(), [](char c) { return c == ' '; })) s = "x";
  return s;
}

}  // namespace

TEST_CASE("tokenize splits words and edge punctuation") {
  CHECK(surfaces(tokenize("Man bites dog")) == std::vector<std::string>{"Man", "bites", "dog"});
  const auto t = tokenize("I want to pet this cat.");
  REQUIRE(t.size() == 7);
  CHECK(t.back().surface == ".");
  CHECK(t.back().pos == PosTag::Punct);
  CHECK(t.front().normalized == "i");
  CHECK(surfaces(tokenize("(Really?!)")) == std::vector<std::string>{"(", "Really", "?", "!", ")"});
  CHECK(surfaces(tokenize("don't stop")) == std::vector<std::string>{"don't", "stop"});
  CHECK(surfaces(tokenize("...")) == std::vector<std::string>{".", ".", "."});
  CHECK_THROWS_AS(tokenize(""), InvalidArgument);
  CHECK_THROWS_AS(tokenize(" \t\n"), InvalidArgument);
}

TEST_CASE("detokenize spacing") {
  CHECK(detokenize(tokenize("I want to pet this cat .")) == "I want to pet this cat.");
  CHECK(detokenize(tokenize("Hello")) == "Hello");
  CHECK(detokenize(tokenize("( quoted ) , fine")) == "(quoted ), fine");
}

TEST_CASE("tokenize and detokenize round-trip on fuzzed text") {
  std::mt19937 gen(42);
  for (int i = 0; i < 2000; ++i) {
    const std::string text = random_text(gen);
    const auto tokens = tokenize(text);
    const std::string joined = detokenize(tokens);
    INFO(text << " -> " << joined);
    CHECK(tokenize(joined) == tokens);
    CHECK(detokenize(tokenize(joined)) == joined);
  }
}

TEST_CASE("lexicon tagging and suffix fallback") {
  PosLexicon lex;
  lex.add("dogs", {{PosTag::Noun, 1.0}});
  lex.add("film", {{PosTag::Verb, 1.0}, {PosTag::Noun, 3.0}});
  lex.add_suffix_rule("ly", PosTag::Adv);

  const auto* tags = lex.tags("film");
  REQUIRE(tags);
  CHECK((*tags)[0].tag == PosTag::Noun);
  CHECK((*tags)[0].frequency + (*tags)[1].frequency == doctest::Approx(1.0).epsilon(1e-12));

  const auto t = tag_pos(tokenize("dogs blorply ly ."), lex);
  CHECK(t[0].pos == PosTag::Noun);
  CHECK(t[0].replaceable);
  CHECK(t[1].pos == PosTag::Adv);
  CHECK_FALSE(t[1].replaceable);
  CHECK(t[2].pos == PosTag::Other);  // the suffix must be a proper suffix
  CHECK(t[3].pos == PosTag::Punct);
  for (auto tag : {PosTag::Noun, PosTag::Verb, PosTag::Adj}) CHECK(is_replaceable(tag));
  for (auto tag : {PosTag::Adv, PosTag::Pron, PosTag::Det, PosTag::Prep, PosTag::Conj, PosTag::Num, PosTag::Punct,
                   PosTag::Other}) {
    CHECK_FALSE(is_replaceable(tag));
  }
}

TEST_CASE("lexicon files report bad lines") {
  auto bad = fixtures::write_temp("lex.tsv", "cat\tNOUN:1\ndog NOUN\n");
  try {
    load_pos_lexicon(bad);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load_pos_lexicon(fixtures::write_temp("lex2.tsv", "cat\tNOUNISH:1\n")), ParseError);
  CHECK_THROWS_AS(load_pos_lexicon(fixtures::write_temp("lex3.tsv", "cat\tNOUN:-1\n")), ParseError);
  const auto& lex = fixtures::bundled().lexicon;
  CHECK(lex.size() > 300);
  CHECK(lex.suffix_rules().front().first == "ly");
}

TEST_CASE("tagger accuracy on a hand-tagged list") {
  const std::vector<std::pair<const char*, PosTag>> gold = {
      {"the", PosTag::Det},        {"a", PosTag::Det},           {"an", PosTag::Det},
      {"this", PosTag::Det},       {"that", PosTag::Det},        {"these", PosTag::Det},
      {"every", PosTag::Det},      {"some", PosTag::Det},        {"no", PosTag::Det},
      {"each", PosTag::Det},       {"i", PosTag::Pron},          {"you", PosTag::Pron},
      {"he", PosTag::Pron},        {"she", PosTag::Pron},        {"it", PosTag::Pron},
      {"we", PosTag::Pron},        {"they", PosTag::Pron},       {"me", PosTag::Pron},
      {"him", PosTag::Pron},       {"them", PosTag::Pron},       {"in", PosTag::Prep},
      {"on", PosTag::Prep},        {"at", PosTag::Prep},         {"with", PosTag::Prep},
      {"from", PosTag::Prep},      {"by", PosTag::Prep},         {"for", PosTag::Prep},
      {"of", PosTag::Prep},        {"under", PosTag::Prep},      {"through", PosTag::Prep},
      {"and", PosTag::Conj},       {"but", PosTag::Conj},        {"or", PosTag::Conj},
      {"because", PosTag::Conj},   {"although", PosTag::Conj},   {"while", PosTag::Conj},
      {"if", PosTag::Conj},        {"very", PosTag::Adv},        {"really", PosTag::Adv},
      {"never", PosTag::Adv},      {"always", PosTag::Adv},      {"quickly", PosTag::Adv},
      {"slowly", PosTag::Adv},     {"quietly", PosTag::Adv},     {"here", PosTag::Adv},
      {"then", PosTag::Adv},       {"yesterday", PosTag::Adv},   {"one", PosTag::Num},
      {"two", PosTag::Num},        {"three", PosTag::Num},       {"ten", PosTag::Num},
      {"four", PosTag::Num},       {"good", PosTag::Adj},        {"bad", PosTag::Adj},
      {"great", PosTag::Adj},      {"boring", PosTag::Adj},      {"beautiful", PosTag::Adj},
      {"terrible", PosTag::Adj},   {"famous", PosTag::Adj},      {"careful", PosTag::Adj},
      {"hopeless", PosTag::Adj},   {"readable", PosTag::Adj},    {"happy", PosTag::Adj},
      {"small", PosTag::Adj},      {"large", PosTag::Adj},       {"new", PosTag::Adj},
      {"old", PosTag::Adj},        {"movie", PosTag::Noun},      {"film", PosTag::Noun},
      {"book", PosTag::Noun},      {"dog", PosTag::Noun},        {"cat", PosTag::Noun},
      {"story", PosTag::Noun},     {"actor", PosTag::Noun},      {"house", PosTag::Noun},
      {"water", PosTag::Noun},     {"happiness", PosTag::Noun},  {"agreement", PosTag::Noun},
      {"education", PosTag::Noun}, {"friendship", PosTag::Noun}, {"child", PosTag::Noun},
      {"woman", PosTag::Noun},     {"table", PosTag::Noun},      {"door", PosTag::Noun},
      {"love", PosTag::Verb},      {"hate", PosTag::Verb},       {"see", PosTag::Verb},
      {"watch", PosTag::Verb},     {"make", PosTag::Verb},       {"take", PosTag::Verb},
      {"enjoy", PosTag::Verb},     {"recommend", PosTag::Verb},  {"organize", PosTag::Verb},
      {"simplify", PosTag::Verb},  {"walking", PosTag::Verb},    {"jumped", PosTag::Verb},
      {"think", PosTag::Verb},     {"know", PosTag::Verb},       {"teacher", PosTag::Noun},
      {"tables", PosTag::Noun}};
  REQUIRE(gold.size() == 100);
  const auto& lex = fixtures::bundled().lexicon;
  std::size_t correct = 0;
  for (const auto& [word, tag] : gold) correct += static_cast<std::size_t>(lex.tag_word(word) == tag);
  CHECK(correct >= 90);
}

TEST_CASE("candidate operators for the pet sentence") {
  const auto& b = fixtures::bundled();
  const auto s = make_instance("I want to pet this cat", b.lexicon, "x");
  const auto ops = candidate_operators(s, 10, b.table, b.lexicon);
  const bool has_dog = std::any_of(ops.begin(), ops.end(), [](const ModOp& op) {
    return op.position == 5 && op.replacement == "dog";
  });
  CHECK(has_dog);
  for (const auto& op : ops) {
    if (op.position == 5) CHECK(b.lexicon.dominant(op.replacement) == PosTag::Noun);
  }
  const auto empty = make_instance("the . this , a", b.lexicon, "y");
  CHECK(candidate_operators(empty, 10, b.table, b.lexicon).empty());
}

TEST_CASE("candidate operators match a brute-force reconstruction") {
  const auto& b = fixtures::bundled();
  const auto& ds = fixtures::polarity();
  const std::size_t k = 10;
  for (std::size_t r = 0; r < 150; ++r) {
    const auto s = make_instance(ds.records[r].text, b.lexicon, "r" + std::to_string(r));
    std::vector<ModOp> expected;
    for (std::size_t pos = 0; pos < s.tokens.size(); ++pos) {
      const auto& tok = s.tokens[pos];
      const bool replaceable = tok.pos == PosTag::Noun || tok.pos == PosTag::Verb || tok.pos == PosTag::Adj;
      if (!replaceable || !b.table.contains(tok.normalized)) continue;
      const auto q = b.table.vector(tok.normalized);
      std::vector<std::pair<double, std::string>> scan;
      for (const auto& w : b.table.words()) {
        if (w == tok.normalized) continue;
        const auto v = b.table.vector(w);
        scan.emplace_back(fixtures::raw_cosine_distance({q.begin(), q.end()}, {v.begin(), v.end()}), w);
      }
      std::sort(scan.begin(), scan.end());
      for (std::size_t i = 0; i < k && i < scan.size(); ++i) {
        const auto* tags = b.lexicon.tags(scan[i].second);
        if (!tags || tags->front().tag != tok.pos) continue;
        expected.push_back({pos, tok.surface, scan[i].second, scan[i].first});
      }
    }
    const auto ops = candidate_operators(s, k, b.table, b.lexicon);
    REQUIRE(ops.size() == expected.size());
    for (std::size_t i = 0; i < ops.size(); ++i) {
      CHECK(ops[i].position == expected[i].position);
      CHECK(ops[i].replacement == expected[i].replacement);
      CHECK(ops[i].original == expected[i].original);
      CHECK(ops[i].distance == doctest::Approx(expected[i].distance).epsilon(1e-12));
      CHECK(s.tokens[ops[i].position].replaceable);
    }
  }
}

TEST_CASE("apply_op substitutes and records provenance") {
  const auto& lex = fixtures::bundled().lexicon;
  IdGenerator ids("g");
  const auto s = make_instance("I hate this film", lex, "c1", 0);
  CHECK(s.provenance.root_id == "c1");
  CHECK(s.provenance.chain.empty());
  const auto g = apply_op(s, {1, "hate", "adore", 0.3}, ids);
  CHECK(g.text == "I adore this film");
  CHECK(g.provenance.chain.size() == 1);
  CHECK(g.provenance.root_id == "c1");
  CHECK(g.id == "g1");
  CHECK(g.tokens[1].pos == PosTag::Verb);

  const auto dogs = make_instance("Dogs bark", lex, "c2");
  CHECK(apply_op(dogs, {0, "Dogs", "cats", 0.2}, ids).text == "Cats bark");
  CHECK_THROWS_AS(apply_op(dogs, {2, "x", "cats", 0.2}, ids), InvalidArgument);
  CHECK_THROWS_AS(apply_op(dogs, {0, "Dogs", "DOGS", 0.0}, ids), InvalidArgument);
}

TEST_CASE("replay reproduces fuzzed chains") {
  const auto& b = fixtures::bundled();
  const auto& ds = fixtures::polarity();
  std::mt19937 gen(3);
  IdGenerator ids;
  std::size_t checked = 0;
  for (std::size_t r = 0; checked < 1000; ++r) {
    const auto root = make_instance(ds.records[r % ds.records.size()].text, b.lexicon, "c" + std::to_string(r));
    auto s = root;
    const std::size_t depth = 1 + gen() % 7;
    for (std::size_t d = 0; d < depth; ++d) {
      const auto ops = candidate_operators(s, 10, b.table, b.lexicon);
      if (ops.empty()) break;
      s = apply_op(s, ops[gen() % ops.size()], ids);
      REQUIRE(replay(root, s.provenance.chain) == s.text);
      CHECK(detokenize(s.tokens) == s.text);
      CHECK(s.tags() == root.tags());
      ++checked;
    }
  }
  auto bad_chain = std::vector<ModOp>{{0, "Nope", "dog", 0.1}};
  CHECK_THROWS_AS(replay(make_instance("cat naps", b.lexicon, "z"), bad_chain), InvalidArgument);
}

TEST_CASE("ids stay unique across threads") {
  IdGenerator ids("q");
  std::vector<std::vector<std::string>> per(4);
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      for (int i = 0; i < 1000; ++i) per[w].push_back(ids.next());
    });
  }
  for (auto& t : workers) t.join();
  std::set<std::string> all;
  for (const auto& v : per) all.insert(v.begin(), v.end());
  CHECK(all.size() == 4000);
}

TEST_CASE("tag names round-trip") {
  for (auto tag : {PosTag::Noun, PosTag::Verb, PosTag::Adj, PosTag::Adv, PosTag::Pron, PosTag::Det, PosTag::Prep,
                   PosTag::Conj, PosTag::Num, PosTag::Punct, PosTag::Other}) {
    CHECK(parse_pos_tag(to_string(tag)) == tag);
  }
  CHECK_FALSE(parse_pos_tag("NOUNS"));
}
