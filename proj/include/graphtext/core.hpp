#pragma once

// Domain types shared by every component: knowledge graphs, entity-annotated
// text, the token and relation vocabularies, and the deterministic graph
// linearization used by the sequence models.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace graphtext {

enum class ErrorCode {
  EMPTY_GRAPH,
  EMPTY_TEXT,
  EMPTY_SPAN,
  ENTITY_MISMATCH,
  NONFINITE_LOSS,
  LENGTH_MISMATCH,
  DEGENERATE_IDF,
  CORRUPT_DATASET,
  BAD_CONFIG,
  BAD_CHECKPOINT,
  IO_ERROR,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::EMPTY_GRAPH: return "EMPTY_GRAPH";
    case ErrorCode::EMPTY_TEXT: return "EMPTY_TEXT";
    case ErrorCode::EMPTY_SPAN: return "EMPTY_SPAN";
    case ErrorCode::ENTITY_MISMATCH: return "ENTITY_MISMATCH";
    case ErrorCode::NONFINITE_LOSS: return "NONFINITE_LOSS";
    case ErrorCode::LENGTH_MISMATCH: return "LENGTH_MISMATCH";
    case ErrorCode::DEGENERATE_IDF: return "DEGENERATE_IDF";
    case ErrorCode::CORRUPT_DATASET: return "CORRUPT_DATASET";
    case ErrorCode::BAD_CONFIG: return "BAD_CONFIG";
    case ErrorCode::BAD_CHECKPOINT: return "BAD_CHECKPOINT";
    case ErrorCode::IO_ERROR: return "IO_ERROR";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

// FNV-1a, used for vocabulary hashes and deterministic template choices.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s.data(), s.size(), h);
}

inline uint64_t fnv1a(const char* s, uint64_t h = 0xcbf29ce484222325ull) {
  return fnv1a(s, std::char_traits<char>::length(s), h);
}

struct Entity {
  std::vector<std::string> tokens;
  std::string id;

  bool operator==(const Entity& o) const { return id == o.id && tokens == o.tokens; }
};

struct Relation {
  std::string label;

  bool operator==(const Relation& o) const { return label == o.label; }
};

struct Triple {
  Entity head;
  Relation relation;
  Entity tail;

  bool operator==(const Triple& o) const {
    return head == o.head && relation == o.relation && tail == o.tail;
  }
};

struct KnowledgeGraph {
  std::vector<Triple> triples;
  std::vector<Entity> entities;  // first-mention order, distinct ids

  bool empty() const { return triples.empty(); }

  bool operator==(const KnowledgeGraph& o) const {
    return triples == o.triples && entities == o.entities;
  }
};

struct EntitySpan {
  std::string entity_id;
  int start = 0;  // half-open token range [start, end)
  int end = 0;

  bool operator==(const EntitySpan& o) const {
    return entity_id == o.entity_id && start == o.start && end == o.end;
  }
};

struct AnnotatedText {
  std::vector<std::string> tokens;
  std::vector<EntitySpan> entity_spans;

  bool operator==(const AnnotatedText& o) const {
    return tokens == o.tokens && entity_spans == o.entity_spans;
  }
};

inline const std::string kNoRelation = "NO_RELATION";

// Reserved token surfaces are uppercase so lowercasing tokenization can
// never produce them; this keeps linearization injective.
namespace tok {
constexpr int kPad = 0;
constexpr int kBos = 1;
constexpr int kEos = 2;
constexpr int kUnk = 3;
constexpr int kHead = 4;
constexpr int kRel = 5;
constexpr int kTail = 6;
constexpr int kNumReserved = 7;
}  // namespace tok

inline const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> r = {"<PAD>", "<BOS>", "<EOS>", "<UNK>",
                                             "<H>",   "<R>",   "<T>"};
  return r;
}

class TokenVocab {
 public:
  TokenVocab() : TokenVocab(std::vector<std::string>{}) {}

  // `words` must not contain reserved surfaces or duplicates.
  explicit TokenVocab(const std::vector<std::string>& words) {
    tokens_ = reserved_tokens();
    for (const auto& w : words) tokens_.push_back(w);
    for (size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
        fail(ErrorCode::BAD_CONFIG, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }

  int size() const { return static_cast<int>(tokens_.size()); }

  // Unknown surfaces map to <UNK>.
  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? tok::kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) > 0; }

  const std::string& token(int i) const { return tokens_.at(static_cast<size_t>(i)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> ids(const std::vector<std::string>& toks) const {
    std::vector<int> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id(t));
    return out;
  }

  uint64_t hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& t : tokens_) {
      h = fnv1a(t, h);
      h = fnv1a("\x1f", 1, h);
    }
    return h;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

class RelationVocab {
 public:
  RelationVocab() { labels_ = {kNoRelation}; index_[kNoRelation] = 0; }

  // `labels` are the real relations; NO_RELATION is prepended at index 0.
  explicit RelationVocab(const std::vector<std::string>& labels) : RelationVocab() {
    for (const auto& l : labels) {
      if (l == kNoRelation) fail(ErrorCode::BAD_CONFIG, "NO_RELATION is implicit");
      if (!index_.emplace(l, static_cast<int>(labels_.size())).second)
        fail(ErrorCode::BAD_CONFIG, "duplicate relation label '" + l + "'");
      labels_.push_back(l);
    }
  }

  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& label(int i) const { return labels_.at(static_cast<size_t>(i)); }
  const std::vector<std::string>& labels() const { return labels_; }

  std::optional<int> index_of(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  uint64_t hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& l : labels_) {
      h = fnv1a(l, h);
      h = fnv1a("\x1f", 1, h);
    }
    return h;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
};

// Lowercased whitespace tokenization.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) {
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(w);
  }
  return out;
}

inline std::vector<std::string> split_label(const std::string& label) {
  std::vector<std::string> out;
  std::istringstream in(label);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& toks, char sep = ' ') {
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out += sep;
    out += toks[i];
  }
  return out;
}

inline void validate_graph(const KnowledgeGraph& g) {
  std::unordered_map<std::string, const Entity*> by_id;
  for (const auto& e : g.entities) {
    if (e.tokens.empty()) fail(ErrorCode::CORRUPT_DATASET, "entity '" + e.id + "' has no tokens");
    for (const auto& t : e.tokens)
      if (t.empty()) fail(ErrorCode::CORRUPT_DATASET, "empty token in entity '" + e.id + "'");
    if (!by_id.emplace(e.id, &e).second)
      fail(ErrorCode::CORRUPT_DATASET, "duplicate entity id '" + e.id + "'");
  }
  std::unordered_set<std::string> seen;
  for (const auto& t : g.triples) {
    if (t.relation.label == kNoRelation)
      fail(ErrorCode::CORRUPT_DATASET, "triple labeled NO_RELATION");
    for (const Entity* e : {&t.head, &t.tail}) {
      auto it = by_id.find(e->id);
      if (it == by_id.end() || !(*it->second == *e))
        fail(ErrorCode::CORRUPT_DATASET, "triple references unknown entity '" + e->id + "'");
    }
    std::string key = t.head.id + "\x1f" + t.relation.label + "\x1f" + t.tail.id;
    if (!seen.insert(key).second)
      fail(ErrorCode::CORRUPT_DATASET, "duplicate triple " + key);
  }
}

inline void validate_text(const AnnotatedText& t) {
  const int n = static_cast<int>(t.tokens.size());
  for (const auto& w : t.tokens)
    if (w.empty()) fail(ErrorCode::CORRUPT_DATASET, "empty token in text");
  std::vector<char> used(static_cast<size_t>(n), 0);
  std::unordered_set<std::string> ids;
  for (const auto& s : t.entity_spans) {
    if (!(0 <= s.start && s.start < s.end && s.end <= n))
      fail(ErrorCode::CORRUPT_DATASET, "span out of bounds for entity '" + s.entity_id + "'");
    if (!ids.insert(s.entity_id).second)
      fail(ErrorCode::CORRUPT_DATASET, "duplicate span for entity '" + s.entity_id + "'");
    for (int i = s.start; i < s.end; ++i) {
      if (used[static_cast<size_t>(i)])
        fail(ErrorCode::CORRUPT_DATASET, "overlapping spans at token " + std::to_string(i));
      used[static_cast<size_t>(i)] = 1;
    }
  }
}

// Seq(g): <H> head tokens <R> relation tokens <T> tail tokens, per triple in
// stored order. Unknown surfaces map to <UNK>.
inline std::vector<int> linearize(const KnowledgeGraph& g, const TokenVocab& v) {
  if (g.empty()) fail(ErrorCode::EMPTY_GRAPH, "cannot linearize a graph without triples");
  std::vector<int> out;
  for (const auto& tr : g.triples) {
    out.push_back(tok::kHead);
    for (const auto& t : tr.head.tokens) out.push_back(v.id(t));
    out.push_back(tok::kRel);
    for (const auto& t : split_label(tr.relation.label)) out.push_back(v.id(t));
    out.push_back(tok::kTail);
    for (const auto& t : tr.tail.tokens) out.push_back(v.id(t));
  }
  return out;
}

struct ParseResult {
  KnowledgeGraph graph;
  std::vector<std::string> diagnostics;
};

// Best-effort inverse of linearize over surface tokens. Malformed regions
// are reported as diagnostics and skipped; this never throws.
inline ParseResult parse_linearized(const std::vector<std::string>& tokens) {
  const std::string& H = reserved_tokens()[tok::kHead];
  const std::string& R = reserved_tokens()[tok::kRel];
  const std::string& T = reserved_tokens()[tok::kTail];
  auto is_marker = [&](size_t i) {
    return tokens[i] == H || tokens[i] == R || tokens[i] == T;
  };

  ParseResult res;
  std::unordered_map<std::string, size_t> entity_index;
  std::unordered_set<std::string> triple_keys;
  auto intern_entity = [&](const std::vector<std::string>& toks) {
    Entity e{toks, join_tokens(toks, '_')};
    auto it = entity_index.find(e.id);
    if (it == entity_index.end()) {
      entity_index.emplace(e.id, res.graph.entities.size());
      res.graph.entities.push_back(e);
    }
    return e;
  };

  size_t i = 0;
  if (i < tokens.size() && tokens[i] != H) {
    // Tokens before the first <H> cannot belong to any triple.
    res.diagnostics.push_back("stray tokens before first <H>");
    while (i < tokens.size() && tokens[i] != H) ++i;
  }

  auto collect = [&](std::vector<std::string>& out) {
    while (i < tokens.size() && !is_marker(i)) out.push_back(tokens[i++]);
  };
  auto resync = [&] {
    while (i < tokens.size() && tokens[i] != H) ++i;
  };

  while (i < tokens.size()) {
    // Invariant: tokens[i] == <H>.
    ++i;
    std::vector<std::string> head, rel, tail;
    bool ok = true;
    collect(head);
    if (head.empty()) {
      res.diagnostics.push_back("empty head segment");
      ok = false;
    }
    if (i >= tokens.size() || tokens[i] != R) {
      res.diagnostics.push_back("missing <R> after head");
      resync();
      continue;
    }
    ++i;
    collect(rel);
    if (rel.empty()) {
      res.diagnostics.push_back("empty relation segment");
      ok = false;
    }
    if (i >= tokens.size() || tokens[i] != T) {
      res.diagnostics.push_back("missing <T> after relation");
      resync();
      continue;
    }
    ++i;
    // A tail segment runs to the next <H>; stray <R>/<T> inside it are
    // malformed, reported per occurrence and skipped.
    while (i < tokens.size() && tokens[i] != H) {
      if (is_marker(i)) {
        res.diagnostics.push_back("unexpected marker inside tail segment");
        ok = false;
        ++i;
        continue;
      }
      tail.push_back(tokens[i++]);
    }
    if (tail.empty()) {
      res.diagnostics.push_back("empty tail segment");
      ok = false;
    }
    if (!ok) continue;
    Entity h = intern_entity(head);
    Entity t = intern_entity(tail);
    std::string label = join_tokens(rel);
    std::string key = h.id + "\x1f" + label + "\x1f" + t.id;
    if (!triple_keys.insert(key).second) {
      res.diagnostics.push_back("duplicate triple " + key);
      continue;
    }
    res.graph.triples.push_back(Triple{h, Relation{label}, t});
  }

  // Drop entities only referenced by rejected triples.
  std::unordered_set<std::string> live;
  for (const auto& tr : res.graph.triples) {
    live.insert(tr.head.id);
    live.insert(tr.tail.id);
  }
  std::vector<Entity> kept;
  for (auto& e : res.graph.entities)
    if (live.count(e.id)) kept.push_back(std::move(e));
  res.graph.entities = std::move(kept);
  return res;
}

// Deterministic entity ordering that fixes the i, j indexing of the edge
// matrix: first span start for text, first mention for graphs.
inline std::vector<std::string> entity_key_order(const AnnotatedText& t) {
  std::vector<const EntitySpan*> spans;
  spans.reserve(t.entity_spans.size());
  for (const auto& s : t.entity_spans) spans.push_back(&s);
  std::sort(spans.begin(), spans.end(),
            [](const EntitySpan* a, const EntitySpan* b) { return a->start < b->start; });
  std::vector<std::string> out;
  out.reserve(spans.size());
  for (const auto* s : spans) out.push_back(s->entity_id);
  return out;
}

inline std::vector<std::string> entity_key_order(const KnowledgeGraph& g) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& tr : g.triples) {
    if (seen.insert(tr.head.id).second) out.push_back(tr.head.id);
    if (seen.insert(tr.tail.id).second) out.push_back(tr.tail.id);
  }
  // Entities never mentioned by a triple keep their stored order.
  for (const auto& e : g.entities)
    if (seen.insert(e.id).second) out.push_back(e.id);
  return out;
}

}  // namespace graphtext
