#pragma once

// Dataset handling: canonical JSONL records, WebNLG-style loading,
// non-parallel split construction, dictionary NER and the synthetic
// template benchmark whose graph<->text mapping is exactly invertible.

#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "graphtext/core.hpp"

namespace graphtext {

using ojson = nlohmann::ordered_json;

struct ParallelDataset {
  std::vector<std::pair<KnowledgeGraph, AnnotatedText>> pairs;
  std::string split = "train";  // {train, dev, test}

  size_t size() const { return pairs.size(); }
};

struct NonParallelDataset {
  std::vector<AnnotatedText> texts;   // D_T
  std::vector<KnowledgeGraph> graphs; // D_G
};

// ---------------------------------------------------------------------------
// Canonical JSON records

inline ojson graph_to_json(const KnowledgeGraph& g) {
  ojson j;
  j["triples"] = ojson::array();
  for (const auto& t : g.triples)
    j["triples"].push_back({t.head.id, t.relation.label, t.tail.id});
  j["entities"] = ojson::object();
  for (const auto& e : g.entities) j["entities"][e.id] = e.tokens;
  return j;
}

inline KnowledgeGraph graph_from_json(const ojson& j) {
  KnowledgeGraph g;
  std::unordered_map<std::string, size_t> index;
  for (const auto& [id, toks] : j.at("entities").items()) {
    Entity e;
    e.id = id;
    e.tokens = toks.get<std::vector<std::string>>();
    index[e.id] = g.entities.size();
    g.entities.push_back(std::move(e));
  }
  for (const auto& t : j.at("triples")) {
    if (!t.is_array() || t.size() != 3)
      fail(ErrorCode::CORRUPT_DATASET, "triple is not a [head, relation, tail] array");
    const std::string head = t[0].get<std::string>();
    const std::string tail = t[2].get<std::string>();
    if (!index.count(head) || !index.count(tail))
      fail(ErrorCode::CORRUPT_DATASET, "triple references missing entity");
    g.triples.push_back(Triple{g.entities[index[head]], Relation{t[1].get<std::string>()},
                               g.entities[index[tail]]});
  }
  validate_graph(g);
  return g;
}

inline ojson text_to_json(const AnnotatedText& t) {
  ojson j;
  j["tokens"] = t.tokens;
  j["entities"] = ojson::array();
  for (const auto& s : t.entity_spans) j["entities"].push_back({s.entity_id, s.start, s.end});
  return j;
}

inline AnnotatedText text_from_json(const ojson& j) {
  AnnotatedText t;
  t.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& s : j.at("entities")) {
    if (!s.is_array() || s.size() != 3)
      fail(ErrorCode::CORRUPT_DATASET, "entity span is not an [id, start, end] array");
    t.entity_spans.push_back(EntitySpan{s[0].get<std::string>(), s[1].get<int>(), s[2].get<int>()});
  }
  validate_text(t);
  return t;
}

inline ojson pair_to_json(const KnowledgeGraph& g, const AnnotatedText& t) {
  return ojson{{"graph", graph_to_json(g)}, {"text", text_to_json(t)}};
}

namespace io {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IO_ERROR, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IO_ERROR, "cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace io

struct LoadStats {
  size_t accepted = 0;
  size_t rejected = 0;
  std::vector<std::string> diagnostics;
};

// Validated pair loading; invalid records are skipped with diagnostics and
// more than 5% invalid records reject the whole file.
inline ParallelDataset load_webnlg(const std::string& path, const std::string& split = "train",
                                   LoadStats* stats = nullptr) {
  ParallelDataset out;
  out.split = split;
  LoadStats local;
  LoadStats& st = stats ? *stats : local;
  const auto lines = io::read_lines(path);
  for (size_t i = 0; i < lines.size(); ++i) {
    try {
      ojson j = ojson::parse(lines[i]);
      KnowledgeGraph g = graph_from_json(j.at("graph"));
      AnnotatedText t = text_from_json(j.at("text"));
      std::unordered_set<std::string> text_ids;
      for (const auto& s : t.entity_spans) text_ids.insert(s.entity_id);
      for (const auto& e : g.entities)
        if (!text_ids.count(e.id))
          fail(ErrorCode::CORRUPT_DATASET, "graph entity '" + e.id + "' not annotated in text");
      out.pairs.emplace_back(std::move(g), std::move(t));
      ++st.accepted;
    } catch (const std::exception& e) {
      ++st.rejected;
      st.diagnostics.push_back("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (st.accepted == 0)
    fail(ErrorCode::CORRUPT_DATASET, path + ": no valid records");
  if (st.rejected * 20 > (st.accepted + st.rejected))
    fail(ErrorCode::CORRUPT_DATASET,
         path + ": " + std::to_string(st.rejected) + " invalid records (>5%)");
  return out;
}

inline std::vector<KnowledgeGraph> load_graphs_jsonl(const std::string& path) {
  std::vector<KnowledgeGraph> out;
  for (const auto& line : io::read_lines(path)) out.push_back(graph_from_json(ojson::parse(line)));
  return out;
}

inline std::vector<AnnotatedText> load_texts_jsonl(const std::string& path) {
  std::vector<AnnotatedText> out;
  for (const auto& line : io::read_lines(path)) out.push_back(text_from_json(ojson::parse(line)));
  return out;
}

// Shuffles the two sides with independent seeded streams; no pairing
// information survives, multiset contents are preserved.
inline NonParallelDataset make_nonparallel(const ParallelDataset& d, uint64_t seed) {
  if (d.pairs.empty()) fail(ErrorCode::BAD_CONFIG, "cannot split an empty dataset");
  NonParallelDataset out;
  for (const auto& [g, t] : d.pairs) {
    out.graphs.push_back(g);
    out.texts.push_back(t);
  }
  std::mt19937_64 rng_t(fnv1a("texts", seed));
  std::mt19937_64 rng_g(fnv1a("graphs", seed));
  std::shuffle(out.texts.begin(), out.texts.end(), rng_t);
  std::shuffle(out.graphs.begin(), out.graphs.end(), rng_g);
  return out;
}

// Greedy longest-match left-to-right entity tagging against a lexicon.
// Every mention is consumed whole; only the first mention of an entity
// emits a span, so spans never overlap and ids stay distinct.
inline std::vector<EntitySpan> dictionary_ner(const std::vector<std::string>& tokens,
                                              const std::vector<Entity>& lexicon) {
  std::vector<const Entity*> by_len;
  for (const auto& e : lexicon) by_len.push_back(&e);
  std::stable_sort(by_len.begin(), by_len.end(),
                   [](const Entity* a, const Entity* b) { return a->tokens.size() > b->tokens.size(); });
  std::vector<EntitySpan> out;
  std::unordered_set<std::string> spanned;
  size_t i = 0;
  while (i < tokens.size()) {
    const Entity* hit = nullptr;
    for (const Entity* e : by_len) {
      if (i + e->tokens.size() > tokens.size()) continue;
      bool match = true;
      for (size_t k = 0; k < e->tokens.size() && match; ++k) match = tokens[i + k] == e->tokens[k];
      if (match) {
        hit = e;
        break;
      }
    }
    if (hit) {
      if (spanned.insert(hit->id).second)
        out.push_back(EntitySpan{hit->id, static_cast<int>(i),
                                 static_cast<int>(i + hit->tokens.size())});
      i += hit->tokens.size();
    } else {
      ++i;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

struct SyntheticConfig {
  int n_entities = 50;
  int n_relations = 8;
  int min_triples = 1;
  int max_triples = 3;
  int templates_per_relation = 2;
  int train_size = 2000;  // per non-parallel side
  int dev_size = 200;
  int test_size = 500;
  uint64_t seed = 17;
};

namespace synth {

inline const std::vector<std::string>& first_names() {
  static const std::vector<std::string> v = {
      "arden",   "bexley", "calder",  "dorian", "elara",  "fenwick", "goran",
      "halcyon", "indira", "juniper", "kestrel", "lorimer", "maren",  "nadir",
      "orin",    "petra",  "quill",   "rowan",  "sable",  "tamsin"};
  return v;
}

inline const std::vector<std::string>& second_names() {
  static const std::vector<std::string> v = {
      "valley",  "harbor", "institute", "press",  "county",
      "river",   "observatory", "bridge", "college", "museum",
      "station", "garden", "tower",     "archive", "falls"};
  return v;
}

inline const std::vector<std::string>& relation_pool() {
  static const std::vector<std::string> v = {
      "genre",      "capital",    "leader",    "founder",   "language", "owner",
      "neighbor",   "successor",  "birth year", "death place", "home town", "team",
      "publisher",  "architect",  "currency",  "religion"};
  return v;
}

constexpr int kNumPatterns = 3;

inline int name_capacity() {
  return static_cast<int>(first_names().size() +
                          first_names().size() * second_names().size());
}

inline Entity entity_for_index(int i) {
  Entity e;
  const auto& f = first_names();
  const auto& s = second_names();
  if (i < static_cast<int>(f.size())) {
    e.tokens = {f[static_cast<size_t>(i)]};
  } else {
    const int k = i - static_cast<int>(f.size());
    e.tokens = {f[static_cast<size_t>(k % static_cast<int>(f.size()))],
                s[static_cast<size_t>((k / static_cast<int>(f.size())) % static_cast<int>(s.size()))]};
  }
  e.id = join_tokens(e.tokens, '_');
  return e;
}

struct TemplatePiece {
  enum Kind { WORD, HEAD, TAIL } kind = WORD;
  std::string word;
};
using Template = std::vector<TemplatePiece>;

// Each relation realizes with its label tokens in the clause; head always
// precedes tail in the default patterns so mention order tracks the triple.
inline std::vector<Template> templates_for(const std::string& label, int count) {
  const auto lab = split_label(label);
  auto W = [](const std::string& w) { return TemplatePiece{TemplatePiece::WORD, w}; };
  std::vector<Template> all;
  {
    Template t{W("the")};
    for (const auto& w : lab) t.push_back(W(w));
    t.push_back(W("of"));
    t.push_back({TemplatePiece::HEAD, ""});
    t.push_back(W("is"));
    t.push_back({TemplatePiece::TAIL, ""});
    t.push_back(W("."));
    all.push_back(std::move(t));
  }
  {
    Template t{{TemplatePiece::HEAD, ""}};
    t.push_back(W("has"));
    for (const auto& w : lab) t.push_back(W(w));
    t.push_back({TemplatePiece::TAIL, ""});
    t.push_back(W("."));
    all.push_back(std::move(t));
  }
  {
    Template t{{TemplatePiece::TAIL, ""}};
    t.push_back(W("is"));
    t.push_back(W("the"));
    for (const auto& w : lab) t.push_back(W(w));
    t.push_back(W("of"));
    t.push_back({TemplatePiece::HEAD, ""});
    t.push_back(W("."));
    all.push_back(std::move(t));
  }
  all.resize(static_cast<size_t>(count));
  return all;
}

inline const std::vector<std::string>& pattern_words(int count) {
  static const std::vector<std::vector<std::string>> words = {
      {"the", "of", "is", "."},
      {"the", "of", "is", "has", "."},
      {"the", "of", "is", "has", "."},
  };
  return words.at(static_cast<size_t>(count - 1));
}

}  // namespace synth

// Deterministic template realizer; realize() is the oracle graph-to-text
// mapping and parse() its exact rule-based inverse (the oracle text-to-graph).
class SyntheticRealizer {
 public:
  SyntheticRealizer(std::vector<Entity> entities, std::vector<std::string> labels,
                    int templates_per_relation)
      : entities_(std::move(entities)), tpr_(templates_per_relation) {
    for (const auto& l : labels) templates_.emplace_back(l, synth::templates_for(l, tpr_));
    for (const auto& e : entities_) by_id_[e.id] = &e;
  }

  const std::vector<Entity>& entities() const { return entities_; }

  // Clause k cycles through the relation's templates; the choice is visible
  // from the triple position, so a sequence model can learn the realization.
  int template_index(size_t clause) const { return static_cast<int>(clause % static_cast<size_t>(tpr_)); }

  AnnotatedText realize(const KnowledgeGraph& g) const {
    AnnotatedText out;
    std::unordered_set<std::string> spanned;
    for (size_t clause = 0; clause < g.triples.size(); ++clause) {
      const auto& tr = g.triples[clause];
      const auto& tmpl = template_of(tr.relation.label)[static_cast<size_t>(template_index(clause))];
      for (const auto& piece : tmpl) {
        if (piece.kind == synth::TemplatePiece::WORD) {
          out.tokens.push_back(piece.word);
          continue;
        }
        const Entity& e = piece.kind == synth::TemplatePiece::HEAD ? tr.head : tr.tail;
        const int start = static_cast<int>(out.tokens.size());
        out.tokens.insert(out.tokens.end(), e.tokens.begin(), e.tokens.end());
        if (spanned.insert(e.id).second)
          out.entity_spans.push_back(EntitySpan{e.id, start, start + static_cast<int>(e.tokens.size())});
      }
    }
    return out;
  }

  // Exact inverse of realize on its image; throws CORRUPT_DATASET elsewhere.
  KnowledgeGraph parse(const std::vector<std::string>& tokens) const {
    KnowledgeGraph g;
    std::unordered_set<std::string> seen_entities;
    auto add_entity = [&](const Entity& e) {
      if (seen_entities.insert(e.id).second) g.entities.push_back(e);
    };
    size_t pos = 0;
    while (pos < tokens.size()) {
      size_t end = pos;
      while (end < tokens.size() && tokens[end] != ".") ++end;
      if (end == tokens.size())
        fail(ErrorCode::CORRUPT_DATASET, "clause without terminating period");
      ++end;  // include '.'
      bool matched = false;
      for (const auto& [label, tmpls] : templates_) {
        for (const auto& tmpl : tmpls) {
          Entity head, tail;
          if (match_clause(tokens, pos, end, tmpl, &head, &tail)) {
            add_entity(head);
            add_entity(tail);
            g.triples.push_back(Triple{head, Relation{label}, tail});
            matched = true;
            break;
          }
        }
        if (matched) break;
      }
      if (!matched)
        fail(ErrorCode::CORRUPT_DATASET,
             "unparseable clause starting at token " + std::to_string(pos));
      pos = end;
    }
    if (g.triples.empty()) fail(ErrorCode::CORRUPT_DATASET, "no clauses found");
    return g;
  }

 private:
  const std::vector<synth::Template>& template_of(const std::string& label) const {
    for (const auto& [l, t] : templates_)
      if (l == label) return t;
    fail(ErrorCode::BAD_CONFIG, "unknown relation label '" + label + "'");
  }

  bool match_clause(const std::vector<std::string>& tokens, size_t begin, size_t end,
                    const synth::Template& tmpl, Entity* head, Entity* tail) const {
    return match_rec(tokens, begin, end, tmpl, 0, head, tail);
  }

  bool match_rec(const std::vector<std::string>& tokens, size_t pos, size_t end,
                 const synth::Template& tmpl, size_t piece, Entity* head, Entity* tail) const {
    if (piece == tmpl.size()) return pos == end;
    const auto& p = tmpl[piece];
    if (p.kind == synth::TemplatePiece::WORD) {
      if (pos >= end || tokens[pos] != p.word) return false;
      return match_rec(tokens, pos + 1, end, tmpl, piece + 1, head, tail);
    }
    // Entity slot: try known entities, longest surface first.
    for (const Entity* e : lexicon_by_length()) {
      const size_t m = e->tokens.size();
      if (pos + m > end) continue;
      bool ok = true;
      for (size_t k = 0; k < m && ok; ++k) ok = tokens[pos + k] == e->tokens[k];
      if (!ok) continue;
      if (match_rec(tokens, pos + m, end, tmpl, piece + 1, head, tail)) {
        *(p.kind == synth::TemplatePiece::HEAD ? head : tail) = *e;
        return true;
      }
    }
    return false;
  }

  const std::vector<const Entity*>& lexicon_by_length() const {
    if (by_length_.empty()) {
      for (const auto& e : entities_) by_length_.push_back(&e);
      std::stable_sort(by_length_.begin(), by_length_.end(),
                       [](const Entity* a, const Entity* b) {
                         return a->tokens.size() > b->tokens.size();
                       });
    }
    return by_length_;
  }

  std::vector<Entity> entities_;
  std::vector<std::pair<std::string, std::vector<synth::Template>>> templates_;
  std::unordered_map<std::string, const Entity*> by_id_;
  mutable std::vector<const Entity*> by_length_;
  int tpr_;
};

struct SyntheticData {
  TokenVocab vocab;
  RelationVocab relations;
  NonParallelDataset train;      // disjoint-source non-parallel training sides
  ParallelDataset train_pairs;   // the text side's underlying pairs (supervised baseline)
  ParallelDataset dev;
  ParallelDataset test;
};

inline void validate_config(const SyntheticConfig& cfg) {
  if (cfg.n_entities < 2 || cfg.n_entities > synth::name_capacity())
    fail(ErrorCode::BAD_CONFIG, "n_entities must be in [2, " +
                                    std::to_string(synth::name_capacity()) + "]");
  if (cfg.n_relations < 1 || cfg.n_relations > static_cast<int>(synth::relation_pool().size()))
    fail(ErrorCode::BAD_CONFIG, "n_relations must be in [1, " +
                                    std::to_string(synth::relation_pool().size()) + "]");
  if (cfg.templates_per_relation < 1 || cfg.templates_per_relation > synth::kNumPatterns)
    fail(ErrorCode::BAD_CONFIG, "templates_per_relation must be in [1, " +
                                    std::to_string(synth::kNumPatterns) + "]");
  if (cfg.min_triples < 1 || cfg.max_triples < cfg.min_triples)
    fail(ErrorCode::BAD_CONFIG, "triples_per_graph range is invalid");
  if (cfg.train_size < 1 || cfg.dev_size < 1 || cfg.test_size < 1)
    fail(ErrorCode::BAD_CONFIG, "corpus sizes must be positive");
  const long pairs = static_cast<long>(cfg.n_entities) * (cfg.n_entities - 1);
  if (cfg.max_triples > pairs)
    fail(ErrorCode::BAD_CONFIG, "max_triples exceeds the number of entity pairs");
}

inline SyntheticData gen_synthetic(const SyntheticConfig& cfg) {
  validate_config(cfg);

  std::vector<Entity> entities;
  for (int i = 0; i < cfg.n_entities; ++i) entities.push_back(synth::entity_for_index(i));
  std::vector<std::string> labels(synth::relation_pool().begin(),
                                  synth::relation_pool().begin() + cfg.n_relations);

  std::vector<std::string> words;
  {
    std::unordered_set<std::string> seen;
    auto put = [&](const std::string& w) {
      if (seen.insert(w).second) words.push_back(w);
    };
    for (const auto& e : entities)
      for (const auto& t : e.tokens) put(t);
    for (const auto& l : labels)
      for (const auto& t : split_label(l)) put(t);
    for (const auto& w : synth::pattern_words(cfg.templates_per_relation)) put(w);
    std::sort(words.begin(), words.end());
  }

  SyntheticData data{TokenVocab(words), RelationVocab(labels), {}, {}, {}, {}};
  SyntheticRealizer realizer(entities, labels, cfg.templates_per_relation);

  std::mt19937_64 rng(cfg.seed);
  auto sample_graph = [&]() {
    KnowledgeGraph g;
    std::uniform_int_distribution<int> n_triples(cfg.min_triples, cfg.max_triples);
    std::uniform_int_distribution<int> pick_entity(0, cfg.n_entities - 1);
    std::uniform_int_distribution<int> pick_relation(0, cfg.n_relations - 1);
    const int k = n_triples(rng);
    std::unordered_set<std::string> used_pairs;
    std::unordered_set<std::string> used_ids;
    while (static_cast<int>(g.triples.size()) < k) {
      const Entity& h = entities[static_cast<size_t>(pick_entity(rng))];
      const Entity& t = entities[static_cast<size_t>(pick_entity(rng))];
      if (h.id == t.id) continue;
      if (!used_pairs.insert(h.id + "\x1f" + t.id).second) continue;
      const std::string& label = labels[static_cast<size_t>(pick_relation(rng))];
      g.triples.push_back(Triple{h, Relation{label}, t});
      for (const Entity* e : {&h, &t})
        if (used_ids.insert(e->id).second) g.entities.push_back(*e);
    }
    return g;
  };
  auto sample_pairs = [&](int n, const std::string& split) {
    ParallelDataset d;
    d.split = split;
    for (int i = 0; i < n; ++i) {
      KnowledgeGraph g = sample_graph();
      AnnotatedText t = realizer.realize(g);
      d.pairs.emplace_back(std::move(g), std::move(t));
    }
    return d;
  };

  ParallelDataset text_side = sample_pairs(cfg.train_size, "train");
  ParallelDataset graph_side = sample_pairs(cfg.train_size, "train");
  data.dev = sample_pairs(cfg.dev_size, "dev");
  data.test = sample_pairs(cfg.test_size, "test");

  data.train.texts = make_nonparallel(text_side, fnv1a("text-side", cfg.seed)).texts;
  data.train.graphs = make_nonparallel(graph_side, fnv1a("graph-side", cfg.seed)).graphs;
  data.train_pairs = std::move(text_side);
  return data;
}

// ---------------------------------------------------------------------------
// Dataset directory layout

namespace layout {
inline const char* kTrainGraphs = "train.graphs.jsonl";
inline const char* kTrainTexts = "train.texts.jsonl";
inline const char* kTrainPairs = "train.pairs.jsonl";
inline const char* kDevPairs = "dev.pairs.jsonl";
inline const char* kTestPairs = "test.pairs.jsonl";
inline const char* kVocab = "vocab.json";
inline const char* kRelations = "relations.json";
inline const char* kGenConfig = "gen_config.json";
}  // namespace layout

inline ojson synthetic_config_to_json(const SyntheticConfig& c) {
  return ojson{{"n_entities", c.n_entities},
               {"n_relations", c.n_relations},
               {"min_triples", c.min_triples},
               {"max_triples", c.max_triples},
               {"templates_per_relation", c.templates_per_relation},
               {"train_size", c.train_size},
               {"dev_size", c.dev_size},
               {"test_size", c.test_size},
               {"seed", c.seed}};
}

inline SyntheticConfig synthetic_config_from_json(const ojson& j) {
  SyntheticConfig c;
  c.n_entities = j.at("n_entities").get<int>();
  c.n_relations = j.at("n_relations").get<int>();
  c.min_triples = j.at("min_triples").get<int>();
  c.max_triples = j.at("max_triples").get<int>();
  c.templates_per_relation = j.at("templates_per_relation").get<int>();
  c.train_size = j.at("train_size").get<int>();
  c.dev_size = j.at("dev_size").get<int>();
  c.test_size = j.at("test_size").get<int>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

inline void write_dataset(const std::string& dir, const SyntheticData& data,
                          const SyntheticConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };

  std::vector<std::string> lines;
  for (const auto& g : data.train.graphs) lines.push_back(graph_to_json(g).dump());
  io::write_lines(path(layout::kTrainGraphs), lines);

  lines.clear();
  for (const auto& t : data.train.texts) lines.push_back(text_to_json(t).dump());
  io::write_lines(path(layout::kTrainTexts), lines);

  for (const auto& [name, split] :
       std::vector<std::pair<const char*, const ParallelDataset*>>{
           {layout::kTrainPairs, &data.train_pairs},
           {layout::kDevPairs, &data.dev},
           {layout::kTestPairs, &data.test}}) {
    lines.clear();
    for (const auto& [g, t] : split->pairs) lines.push_back(pair_to_json(g, t).dump());
    io::write_lines(path(name), lines);
  }

  io::write_lines(path(layout::kVocab), {ojson{{"tokens", data.vocab.tokens()}}.dump(1)});
  io::write_lines(path(layout::kRelations), {ojson{{"labels", data.relations.labels()}}.dump(1)});
  io::write_lines(path(layout::kGenConfig), {synthetic_config_to_json(cfg).dump(1)});
}

struct DatasetDir {
  TokenVocab vocab;
  RelationVocab relations;
  NonParallelDataset train;
  ParallelDataset dev;
  ParallelDataset test;
  std::optional<ParallelDataset> train_pairs;
};

inline TokenVocab load_vocab(const std::string& path) {
  const auto lines = io::read_lines(path);
  ojson j = ojson::parse(join_tokens(lines, '\n'));
  auto tokens = j.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < static_cast<size_t>(tok::kNumReserved) ||
      !std::equal(reserved_tokens().begin(), reserved_tokens().end(), tokens.begin()))
    fail(ErrorCode::CORRUPT_DATASET, path + ": reserved tokens missing or misplaced");
  return TokenVocab(std::vector<std::string>(tokens.begin() + tok::kNumReserved, tokens.end()));
}

inline RelationVocab load_relations(const std::string& path) {
  const auto lines = io::read_lines(path);
  ojson j = ojson::parse(join_tokens(lines, '\n'));
  auto labels = j.at("labels").get<std::vector<std::string>>();
  if (labels.empty() || labels[0] != kNoRelation)
    fail(ErrorCode::CORRUPT_DATASET, path + ": NO_RELATION must be first");
  return RelationVocab(std::vector<std::string>(labels.begin() + 1, labels.end()));
}

inline DatasetDir load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
  DatasetDir d;
  d.vocab = load_vocab(path(layout::kVocab));
  d.relations = load_relations(path(layout::kRelations));
  d.train.graphs = load_graphs_jsonl(path(layout::kTrainGraphs));
  d.train.texts = load_texts_jsonl(path(layout::kTrainTexts));
  d.dev = load_webnlg(path(layout::kDevPairs), "dev");
  d.test = load_webnlg(path(layout::kTestPairs), "test");
  if (fs::exists(path(layout::kTrainPairs)))
    d.train_pairs = load_webnlg(path(layout::kTrainPairs), "train");
  return d;
}

}  // namespace graphtext
