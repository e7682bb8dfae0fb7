#pragma once

// Text-to-graph component: bidirectional contextual encoder, per-entity
// average pooling and a pairwise edge classifier over the relation
// vocabulary (NO_RELATION included). Nodes are anchored to the given entity
// spans; only edges are predicted.

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "graphtext/core.hpp"
#include "graphtext/nn.hpp"

namespace graphtext {

using ad::Mat;
using ad::Var;

struct T2GConfig {
  int embed_dim = 256;
  int hidden = 512;  // per direction
  int layers = 2;
  int classifier_hidden = 512;
};

// Gold edge assignment over the text's entity key order; absent pairs are
// NO_RELATION, the diagonal is never scored.
struct GoldEdges {
  std::vector<std::string> order;
  std::vector<int> labels;  // k*k, row-major
  int k = 0;
};

inline GoldEdges build_gold_edges(const AnnotatedText& t, const KnowledgeGraph& g,
                                  const RelationVocab& relations) {
  GoldEdges gold;
  gold.order = entity_key_order(t);
  gold.k = static_cast<int>(gold.order.size());
  gold.labels.assign(static_cast<size_t>(gold.k) * static_cast<size_t>(gold.k), 0);
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < gold.k; ++i) index[gold.order[static_cast<size_t>(i)]] = i;
  for (const auto& e : g.entities)
    if (!index.count(e.id))
      fail(ErrorCode::ENTITY_MISMATCH, "graph entity '" + e.id + "' has no span in the text");
  for (const auto& tr : g.triples) {
    auto label = relations.index_of(tr.relation.label);
    if (!label)
      fail(ErrorCode::CORRUPT_DATASET, "relation '" + tr.relation.label + "' not in vocabulary");
    const int i = index.at(tr.head.id);
    const int j = index.at(tr.tail.id);
    gold.labels[static_cast<size_t>(i * gold.k + j)] = *label;
  }
  return gold;
}

// Mean negative log-likelihood over the k*k - k off-diagonal cells of a
// precomputed score slab (labels x k*k, column (i*k+j) scores pair (i, j)).
inline double edge_nll_forward(const Mat& scores, const std::vector<int>& labels, int k) {
  if (k <= 1) return 0.0;
  double total = 0.0;
  int cells = 0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      const auto col = scores.col(i * k + j);
      const double mx = col.maxCoeff();
      const double lse = mx + std::log((col.array() - mx).exp().sum());
      total += lse - col(labels[static_cast<size_t>(i * k + j)], 0);
      ++cells;
    }
  }
  return total / cells;
}

class T2GModel {
 public:
  T2GModel(int vocab_size, int n_labels, T2GConfig cfg, uint64_t seed)
      : cfg_(cfg), vocab_size_(vocab_size), n_labels_(n_labels) {
    std::mt19937_64 rng(seed);
    embedding_ = &params_.add_normal("t2g.embed", cfg.embed_dim, vocab_size, rng, 0.1);
    encoder_ = nn::make_bigru(params_, "t2g.enc", cfg.embed_dim, cfg.hidden, cfg.layers, rng);
    w1_ = &params_.add_glorot("t2g.cls.W1", cfg.classifier_hidden, 4 * cfg.hidden, rng);
    b1_ = &params_.add("t2g.cls.b1", cfg.classifier_hidden, 1);
    w2_ = &params_.add_glorot("t2g.cls.W2", n_labels, cfg.classifier_hidden, rng);
    b2_ = &params_.add("t2g.cls.b2", n_labels, 1);
  }

  T2GModel(const T2GModel&) = delete;
  T2GModel& operator=(const T2GModel&) = delete;

  const T2GConfig& config() const { return cfg_; }
  int vocab_size() const { return vocab_size_; }
  int n_labels() const { return n_labels_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }
  uint64_t checksum() const { return params_.checksum(); }

  // One context column per token, both directions visible at every position.
  Mat encode_tokens(const std::vector<int>& ids) const {
    if (ids.empty()) fail(ErrorCode::EMPTY_TEXT, "cannot encode an empty token sequence");
    return nn::bigru_forward(encoder_, nn::embed_forward(*embedding_, ids));
  }

  static Mat pool_entity(const Mat& context, const EntitySpan& span) {
    if (span.end <= span.start) fail(ErrorCode::EMPTY_SPAN, "entity span is empty");
    return context.middleCols(span.start, span.end - span.start).rowwise().sum() /
           (span.end - span.start);
  }

  Mat classify_pair(const Mat& vi, const Mat& vj) const {
    Mat x(vi.rows() + vj.rows(), 1);
    x << vi, vj;
    Mat h = (w1_->value * x + b1_->value).unaryExpr([](double a) { return std::tanh(a); });
    return w2_->value * h + b2_->value;
  }

  // n_labels x (k*k) score slab over all ordered pairs, row-major cells.
  Mat classify_edges(const std::vector<Mat>& entity_vecs) const {
    const int k = static_cast<int>(entity_vecs.size());
    if (k < 1) fail(ErrorCode::EMPTY_SPAN, "need at least one entity vector");
    Mat scores(n_labels_, k * k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        scores.col(i * k + j) =
            classify_pair(entity_vecs[static_cast<size_t>(i)], entity_vecs[static_cast<size_t>(j)]);
    return scores;
  }

  std::vector<Mat> entity_vectors(const AnnotatedText& text, const TokenVocab& vocab) const {
    Mat ctx = encode_tokens(vocab.ids(text.tokens));
    std::unordered_map<std::string, const EntitySpan*> spans;
    for (const auto& s : text.entity_spans) spans[s.entity_id] = &s;
    std::vector<Mat> vecs;
    for (const auto& id : entity_key_order(text)) vecs.push_back(pool_entity(ctx, *spans.at(id)));
    return vecs;
  }

  double loss(const AnnotatedText& text, const KnowledgeGraph& graph, const TokenVocab& vocab,
              const RelationVocab& relations) const {
    GoldEdges gold = build_gold_edges(text, graph, relations);
    if (gold.k <= 1) return 0.0;
    return edge_nll_forward(classify_edges(entity_vectors(text, vocab)), gold.labels, gold.k);
  }

  // Tape-backed loss; `weight` scales the contribution so per-sample sweeps
  // of a batch accumulate the gradient of the batch mean.
  double loss_backward(const AnnotatedText& text, const KnowledgeGraph& graph,
                       const TokenVocab& vocab, const RelationVocab& relations, double weight) {
    GoldEdges gold = build_gold_edges(text, graph, relations);
    if (gold.k <= 1) return 0.0;
    std::vector<int> ids = vocab.ids(text.tokens);
    if (ids.empty()) fail(ErrorCode::EMPTY_TEXT, "cannot encode an empty token sequence");

    ad::Tape tape;
    std::vector<Var> ctx = nn::bigru_tape(tape, encoder_, nn::embed_tape(tape, *embedding_, ids));
    Var H = tape.hstack(ctx);
    std::unordered_map<std::string, const EntitySpan*> spans;
    for (const auto& s : text.entity_spans) spans[s.entity_id] = &s;
    std::vector<Var> vecs;
    for (const auto& id : gold.order) {
      const EntitySpan* s = spans.at(id);
      if (s->end <= s->start) fail(ErrorCode::EMPTY_SPAN, "entity span is empty");
      vecs.push_back(tape.mean_cols(H, s->start, s->end));
    }
    std::vector<Var> cells;
    for (int i = 0; i < gold.k; ++i) {
      for (int j = 0; j < gold.k; ++j) {
        if (i == j) continue;
        Var x = tape.concat(vecs[static_cast<size_t>(i)], vecs[static_cast<size_t>(j)]);
        Var h = tape.tanh_(tape.affine(*w1_, x, *b1_));
        Var logits = tape.affine(*w2_, h, *b2_);
        cells.push_back(tape.cross_entropy(logits, gold.labels[static_cast<size_t>(i * gold.k + j)]));
      }
    }
    Var loss = tape.scale(tape.average(cells), weight);
    return tape.backward(loss) / weight;
  }

  // Graph over exactly the text's entities; edge (i, j) gets the argmax
  // label (ties -> lowest index), NO_RELATION cells and the diagonal are
  // dropped.
  KnowledgeGraph predict(const AnnotatedText& text, const TokenVocab& vocab,
                         const RelationVocab& relations) const {
    KnowledgeGraph out;
    if (text.entity_spans.empty()) return out;
    std::unordered_map<std::string, const EntitySpan*> spans;
    for (const auto& s : text.entity_spans) spans[s.entity_id] = &s;
    std::vector<std::string> order = entity_key_order(text);
    for (const auto& id : order) {
      const EntitySpan* s = spans.at(id);
      Entity e;
      e.id = id;
      e.tokens.assign(text.tokens.begin() + s->start, text.tokens.begin() + s->end);
      out.entities.push_back(std::move(e));
    }
    const int k = static_cast<int>(order.size());
    if (k == 1) return out;
    Mat scores = classify_edges(entity_vectors(text, vocab));
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        if (i == j) continue;
        const auto col = scores.col(i * k + j);
        int best = 0;
        for (int r = 1; r < n_labels_; ++r)
          if (col(r, 0) > col(best, 0)) best = r;
        if (best != 0)
          out.triples.push_back(Triple{out.entities[static_cast<size_t>(i)],
                                       Relation{relations.label(best)},
                                       out.entities[static_cast<size_t>(j)]});
      }
    }
    return out;
  }

 private:
  T2GConfig cfg_;
  int vocab_size_;
  int n_labels_;
  ad::ParamSet params_;
  ad::Param* embedding_ = nullptr;
  nn::BiGruStack encoder_;
  ad::Param* w1_ = nullptr;
  ad::Param* b1_ = nullptr;
  ad::Param* w2_ = nullptr;
  ad::Param* b2_ = nullptr;
};

// One gradient step on the mean batch loss; returns the pre-update loss.
inline double t2g_train_step(T2GModel& model,
                             const std::vector<std::pair<AnnotatedText, KnowledgeGraph>>& batch,
                             ad::Adam& opt, const TokenVocab& vocab,
                             const RelationVocab& relations) {
  if (batch.empty()) fail(ErrorCode::BAD_CONFIG, "empty training batch");
  model.params().zero_grad();
  double total = 0.0;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& [text, graph] : batch)
    total += model.loss_backward(text, graph, vocab, relations, w);
  const double mean = total / static_cast<double>(batch.size());
  if (!std::isfinite(mean) || !model.params().grads_finite()) {
    model.params().zero_grad();
    fail(ErrorCode::NONFINITE_LOSS, "non-finite loss or gradient in t2g step");
  }
  opt.step(model.params());
  return mean;
}

}  // namespace graphtext
