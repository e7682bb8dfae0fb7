#include <catch_amalgamated.hpp>

#include <random>
#include <set>

#include "graphtext/core.hpp"

using namespace graphtext;

namespace {

Entity ent(std::vector<std::string> tokens) {
  Entity e;
  e.tokens = std::move(tokens);
  e.id = join_tokens(e.tokens, '_');
  return e;
}

KnowledgeGraph graph_of(std::vector<Triple> triples) {
  KnowledgeGraph g;
  g.triples = std::move(triples);
  std::set<std::string> seen;
  for (const auto& t : g.triples)
    for (const Entity* e : {&t.head, &t.tail})
      if (seen.insert(e->id).second) g.entities.push_back(*e);
  return g;
}

// Random graphs with surface-distinct entities and simple labels.
KnowledgeGraph random_graph(std::mt19937_64& rng, int max_triples = 4) {
  static const std::vector<std::string> names = {"ada",  "bo",   "cy",  "dee", "eli",
                                                 "finn", "gus",  "hal", "ivy", "jo"};
  static const std::vector<std::string> rels = {"likes", "knows", "near", "owns"};
  std::uniform_int_distribution<int> n_triples(1, max_triples);
  std::uniform_int_distribution<size_t> pick_name(0, names.size() - 1);
  std::uniform_int_distribution<size_t> pick_rel(0, rels.size() - 1);
  std::vector<Triple> triples;
  std::set<std::string> keys;
  const int want = n_triples(rng);
  while (static_cast<int>(triples.size()) < want) {
    Entity h = ent({names[pick_name(rng)]});
    Entity t = ent({names[pick_name(rng)]});
    if (h.id == t.id) continue;
    std::string rel = rels[pick_rel(rng)];
    if (!keys.insert(h.id + "|" + rel + "|" + t.id).second) continue;
    triples.push_back(Triple{h, Relation{rel}, t});
  }
  return graph_of(std::move(triples));
}

TokenVocab vocab_for_tests() {
  return TokenVocab({"1981",  "ada",  "allen",  "bo",    "birth", "cy",    "dee",  "eli",
                     "finn",  "forest", "genre", "gus",  "hal",   "hip",   "hop",  "ivy",
                     "jo",    "knows", "likes",  "near", "owns",  "year"});
}

std::vector<std::string> surfaces(const std::vector<int>& ids, const TokenVocab& v) {
  std::vector<std::string> out;
  for (int id : ids) out.push_back(v.token(id));
  return out;
}

// Independent scanner counting the malformation rules parse_linearized
// reports; written as a flat pass over marker positions.
int reference_violation_count(const std::vector<std::string>& toks) {
  const std::string H = "<H>", R = "<R>", T = "<T>";
  auto is_marker = [&](const std::string& s) { return s == H || s == R || s == T; };
  int count = 0;
  size_t i = 0;
  if (!toks.empty() && toks[0] != H) {
    ++count;
    while (i < toks.size() && toks[i] != H) ++i;
  }
  std::set<std::string> seen_triples;
  while (i < toks.size()) {
    ++i;  // at <H>
    std::string head, rel, tail;
    int segment_violations = 0;
    while (i < toks.size() && !is_marker(toks[i])) head += toks[i++] + " ";
    if (head.empty()) ++segment_violations;
    if (i >= toks.size() || toks[i] != R) {
      count += segment_violations + 1;
      while (i < toks.size() && toks[i] != H) ++i;
      continue;
    }
    ++i;
    while (i < toks.size() && !is_marker(toks[i])) rel += toks[i++] + " ";
    if (rel.empty()) ++segment_violations;
    if (i >= toks.size() || toks[i] != T) {
      count += segment_violations + 1;
      while (i < toks.size() && toks[i] != H) ++i;
      continue;
    }
    ++i;
    while (i < toks.size() && toks[i] != H) {
      if (is_marker(toks[i]))
        ++segment_violations;
      else
        tail += toks[i] + " ";
      ++i;
    }
    if (tail.empty()) ++segment_violations;
    count += segment_violations;
    if (segment_violations == 0 && !seen_triples.insert(head + "|" + rel + "|" + tail).second)
      ++count;  // duplicate triple
  }
  return count;
}

}  // namespace

TEST_CASE("linearize follows the <H>/<R>/<T> scheme in stored triple order") {
  TokenVocab v = vocab_for_tests();
  Entity allen = ent({"allen", "forest"});
  KnowledgeGraph g = graph_of({Triple{allen, Relation{"genre"}, ent({"hip", "hop"})},
                               Triple{allen, Relation{"birth year"}, ent({"1981"})}});
  auto toks = surfaces(linearize(g, v), v);
  REQUIRE(toks == std::vector<std::string>{"<H>", "allen", "forest", "<R>", "genre", "<T>", "hip",
                                           "hop", "<H>", "allen", "forest", "<R>", "birth",
                                           "year", "<T>", "1981"});
}

TEST_CASE("single one-token triple linearizes to six tokens with markers at 0, 2, 4") {
  TokenVocab v = vocab_for_tests();
  KnowledgeGraph g = graph_of({Triple{ent({"ada"}), Relation{"likes"}, ent({"bo"})}});
  auto ids = linearize(g, v);
  REQUIRE(ids.size() == 6);
  CHECK(ids[0] == tok::kHead);
  CHECK(ids[2] == tok::kRel);
  CHECK(ids[4] == tok::kTail);
}

TEST_CASE("linearized length matches an independent token recount") {
  TokenVocab v = vocab_for_tests();
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    KnowledgeGraph g = random_graph(rng, 3);
    size_t expected = 0;
    for (const auto& t : g.triples)
      expected += 3 + t.head.tokens.size() + split_label(t.relation.label).size() +
                  t.tail.tokens.size();
    REQUIRE(linearize(g, v).size() == expected);
  }
}

TEST_CASE("linearize rejects the empty graph") {
  TokenVocab v = vocab_for_tests();
  KnowledgeGraph g;
  try {
    linearize(g, v);
    FAIL("expected EMPTY_GRAPH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EMPTY_GRAPH);
  }
}

TEST_CASE("parse_linearized inverts linearize at triple level") {
  TokenVocab v = vocab_for_tests();
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 1000; ++trial) {
    KnowledgeGraph g = random_graph(rng);
    ParseResult res = parse_linearized(surfaces(linearize(g, v), v));
    REQUIRE(res.diagnostics.empty());
    REQUIRE(res.graph.triples.size() == g.triples.size());
    for (size_t i = 0; i < g.triples.size(); ++i) {
      CHECK(res.graph.triples[i].head.tokens == g.triples[i].head.tokens);
      CHECK(res.graph.triples[i].relation.label == g.triples[i].relation.label);
      CHECK(res.graph.triples[i].tail.tokens == g.triples[i].tail.tokens);
    }
  }
}

TEST_CASE("linearize is injective over surface-distinct random graphs") {
  TokenVocab v = vocab_for_tests();
  std::mt19937_64 rng(99);
  std::map<std::string, std::string> seen;  // linearization -> canonical triple key
  for (int trial = 0; trial < 2000; ++trial) {
    KnowledgeGraph g = random_graph(rng, 3);
    std::string lin;
    for (int id : linearize(g, v)) lin += std::to_string(id) + ",";
    std::string key;
    for (const auto& t : g.triples)
      key += t.head.id + "|" + t.relation.label + "|" + t.tail.id + ";";
    auto [it, inserted] = seen.emplace(lin, key);
    if (!inserted) CHECK(it->second == key);
  }
}

TEST_CASE("missing tail yields an empty graph and one diagnostic") {
  ParseResult res = parse_linearized({"<H>", "a", "<R>", "r", "<T>"});
  CHECK(res.graph.triples.empty());
  CHECK(res.graph.entities.empty());
  REQUIRE(res.diagnostics.size() == 1);
}

TEST_CASE("fuzzed token streams never crash and match the reference scanner") {
  std::vector<std::string> alphabet = {"<H>", "<R>", "<T>", "a", "b", "c", "dd"};
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(0, 24);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<std::string> toks;
    const int n = len(rng);
    for (int k = 0; k < n; ++k) toks.push_back(alphabet[pick(rng)]);
    ParseResult res = parse_linearized(toks);
    REQUIRE(static_cast<int>(res.diagnostics.size()) == reference_violation_count(toks));
    for (const auto& t : res.graph.triples) {
      CHECK_FALSE(t.head.tokens.empty());
      CHECK_FALSE(t.tail.tokens.empty());
      CHECK_FALSE(t.relation.label.empty());
    }
  }
}

TEST_CASE("entity_key_order sorts text entities by first span start") {
  AnnotatedText t;
  t.tokens = {"x", "a", "x", "x", "x", "b", "b"};
  t.entity_spans = {EntitySpan{"late", 5, 7}, EntitySpan{"early", 1, 2}};
  REQUIRE(entity_key_order(t) == std::vector<std::string>{"early", "late"});
}

TEST_CASE("entity_key_order follows first mention across graph triples") {
  Entity a = ent({"ada"}), b = ent({"bo"}), c = ent({"cy"});
  KnowledgeGraph g = graph_of({Triple{a, Relation{"likes"}, b}, Triple{b, Relation{"knows"}, c}});
  REQUIRE(entity_key_order(g) == std::vector<std::string>{"ada", "bo", "cy"});
}

TEST_CASE("entity_key_order is invariant under span list permutation") {
  std::mt19937_64 rng(5);
  AnnotatedText t;
  t.tokens = std::vector<std::string>(20, "w");
  t.entity_spans = {EntitySpan{"e0", 0, 1}, EntitySpan{"e1", 3, 5}, EntitySpan{"e2", 7, 8},
                    EntitySpan{"e3", 10, 12}, EntitySpan{"e4", 15, 16}};
  const auto expected = entity_key_order(t);
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(t.entity_spans.begin(), t.entity_spans.end(), rng);
    auto order = entity_key_order(t);
    CHECK(order == expected);
    // Permutation of the id set.
    std::set<std::string> ids(order.begin(), order.end());
    CHECK(ids.size() == t.entity_spans.size());
  }
}

TEST_CASE("vocabulary reserves fixed indices and maps unknowns to <UNK>") {
  TokenVocab v({"zebra"});
  CHECK(v.id("<PAD>") == tok::kPad);
  CHECK(v.id("<BOS>") == tok::kBos);
  CHECK(v.id("<EOS>") == tok::kEos);
  CHECK(v.id("<UNK>") == tok::kUnk);
  CHECK(v.id("<H>") == tok::kHead);
  CHECK(v.id("<R>") == tok::kRel);
  CHECK(v.id("<T>") == tok::kTail);
  CHECK(v.id("zebra") == tok::kNumReserved);
  CHECK(v.id("missing") == tok::kUnk);
  CHECK(v.size() == tok::kNumReserved + 1);
}

TEST_CASE("relation vocabulary pins NO_RELATION at index 0") {
  RelationVocab r({"genre", "owner"});
  CHECK(r.label(0) == kNoRelation);
  CHECK(r.index_of("genre").value() == 1);
  CHECK(r.index_of("owner").value() == 2);
  CHECK_FALSE(r.index_of("absent").has_value());
}

TEST_CASE("tokenize lowercases and can never produce reserved tokens") {
  auto toks = tokenize("The <h> Allen FOREST  1981");
  REQUIRE(toks == std::vector<std::string>{"the", "<h>", "allen", "forest", "1981"});
  for (const auto& t : toks)
    for (const auto& r : reserved_tokens()) CHECK(t != r);
}
