#pragma once

// Graph-to-text component: a small attention-equipped encoder-decoder over
// the linearized graph sequence. The token embedding table is shared between
// the encoder, the decoder input and the output projection.

#include <cmath>
#include <string>
#include <vector>

#include "graphtext/core.hpp"
#include "graphtext/nn.hpp"

namespace graphtext {

struct G2TConfig {
  int embed_dim = 128;
  int hidden = 256;  // per encoder direction; also the decoder state size
  int layers = 1;
};

struct DecodeConfig {
  int max_length = 64;  // greedy decoding, deterministic
};

class G2TModel {
 public:
  G2TModel(int vocab_size, G2TConfig cfg, uint64_t seed) : cfg_(cfg), vocab_size_(vocab_size) {
    std::mt19937_64 rng(seed);
    embedding_ = &params_.add_normal("g2t.embed", cfg.embed_dim, vocab_size, rng, 0.1);
    encoder_ = nn::make_bigru(params_, "g2t.enc", cfg.embed_dim, cfg.hidden, cfg.layers, rng);
    w_proj_ = &params_.add_glorot("g2t.attn.Wp", cfg.hidden, 2 * cfg.hidden, rng);
    w_init_ = &params_.add_glorot("g2t.dec.Wi", cfg.hidden, 2 * cfg.hidden, rng);
    b_init_ = &params_.add("g2t.dec.bi", cfg.hidden, 1);
    decoder_ = ad::make_gru(params_, "g2t.dec.gru", cfg.embed_dim, cfg.hidden, rng);
    w_comb_ = &params_.add_glorot("g2t.out.Wc", cfg.embed_dim, 2 * cfg.hidden, rng);
    b_comb_ = &params_.add("g2t.out.bc", cfg.embed_dim, 1);
    b_out_ = &params_.add("g2t.out.b", vocab_size, 1);
  }

  G2TModel(const G2TModel&) = delete;
  G2TModel& operator=(const G2TModel&) = delete;

  const G2TConfig& config() const { return cfg_; }
  int vocab_size() const { return vocab_size_; }
  ad::ParamSet& params() { return params_; }
  const ad::ParamSet& params() const { return params_; }
  uint64_t checksum() const { return params_.checksum(); }

  // Teacher-forced mean per-token NLL of `text` given linearize(graph).
  double loss(const KnowledgeGraph& graph, const AnnotatedText& text,
              const TokenVocab& vocab) const {
    if (text.tokens.empty()) fail(ErrorCode::EMPTY_TEXT, "target text is empty");
    const std::vector<int> src = linearize(graph, vocab);
    std::vector<int> targets = vocab.ids(text.tokens);
    targets.push_back(tok::kEos);

    ad::Mat enc = nn::bigru_forward(encoder_, nn::embed_forward(*embedding_, src));
    ad::Mat attn = w_proj_->value * enc;  // hidden x T
    ad::Mat state = init_state(enc);
    double total = 0.0;
    int prev = tok::kBos;
    for (int target : targets) {
      state = ad::gru_forward(decoder_, embedding_->value.col(prev), state, nullptr);
      ad::Mat logits = step_logits(attn, state);
      const double mx = logits.maxCoeff();
      const double lse = mx + std::log((logits.array() - mx).exp().sum());
      total += lse - logits(target, 0);
      prev = target;
    }
    return total / static_cast<double>(targets.size());
  }

  // Tape-backed loss; `weight` scales the contribution for batch means.
  double loss_backward(const KnowledgeGraph& graph, const AnnotatedText& text,
                       const TokenVocab& vocab, double weight) {
    if (text.tokens.empty()) fail(ErrorCode::EMPTY_TEXT, "target text is empty");
    const std::vector<int> src = linearize(graph, vocab);
    std::vector<int> targets = vocab.ids(text.tokens);
    targets.push_back(tok::kEos);

    ad::Tape tape;
    std::vector<ad::Var> enc =
        nn::bigru_tape(tape, encoder_, nn::embed_tape(tape, *embedding_, src));
    ad::Var H = tape.hstack(enc);
    ad::Var P = tape.matmul(*w_proj_, H);
    ad::Var init_in = tape.concat(tape.rows(enc.back(), 0, cfg_.hidden),
                                  tape.rows(enc.front(), cfg_.hidden, cfg_.hidden));
    ad::Var s = tape.tanh_(tape.affine(*w_init_, init_in, *b_init_));

    std::vector<ad::Var> nll;
    int prev = tok::kBos;
    for (int target : targets) {
      s = tape.gru(decoder_, tape.lookup(*embedding_, prev), s);
      ad::Var alpha = tape.softmax_col(tape.matmul_tn(P, s));
      ad::Var context = tape.matmul_nn(P, alpha);
      ad::Var comb = tape.tanh_(tape.affine(*w_comb_, tape.concat(s, context), *b_comb_));
      ad::Var logits = tape.tied_logits(*embedding_, comb, *b_out_);
      nll.push_back(tape.cross_entropy(logits, target));
      prev = target;
    }
    ad::Var loss = tape.scale(tape.average(nll), weight);
    return tape.backward(loss) / weight;
  }

  // Greedy decode of the linearized graph. <PAD> and <BOS> are masked out,
  // so outputs stay within the ordinary vocabulary plus <EOS>.
  std::vector<int> greedy_decode(const std::vector<int>& src, int max_length) const {
    ad::Mat enc = nn::bigru_forward(encoder_, nn::embed_forward(*embedding_, src));
    ad::Mat attn = w_proj_->value * enc;
    ad::Mat state = init_state(enc);
    std::vector<int> out;
    int prev = tok::kBos;
    for (int step = 0; step < max_length; ++step) {
      state = ad::gru_forward(decoder_, embedding_->value.col(prev), state, nullptr);
      ad::Mat logits = step_logits(attn, state);
      int best = tok::kEos;
      for (int i = 0; i < vocab_size_; ++i) {
        if (i == tok::kPad || i == tok::kBos) continue;
        if (logits(i, 0) > logits(best, 0)) best = i;
      }
      if (best == tok::kEos) break;
      out.push_back(best);
      prev = best;
    }
    return out;
  }

  AnnotatedText generate(const KnowledgeGraph& graph, const TokenVocab& vocab,
                         const DecodeConfig& cfg) const {
    const std::vector<int> ids = greedy_decode(linearize(graph, vocab), cfg.max_length);
    AnnotatedText out;
    out.tokens.reserve(ids.size());
    for (int id : ids) out.tokens.push_back(vocab.token(id));
    out.entity_spans = match_entity_spans(out.tokens, graph.entities);
    return out;
  }

  // First non-overlapping contiguous occurrence of each entity's surface
  // tokens, assigned in the given entity order. Entities that never occur
  // get no span.
  static std::vector<EntitySpan> match_entity_spans(const std::vector<std::string>& tokens,
                                                    const std::vector<Entity>& entities) {
    std::vector<EntitySpan> out;
    std::vector<char> used(tokens.size(), 0);
    for (const auto& e : entities) {
      const int m = static_cast<int>(e.tokens.size());
      const int n = static_cast<int>(tokens.size());
      for (int start = 0; start + m <= n; ++start) {
        bool match = true;
        for (int i = 0; i < m && match; ++i)
          match = !used[static_cast<size_t>(start + i)] &&
                  tokens[static_cast<size_t>(start + i)] == e.tokens[static_cast<size_t>(i)];
        if (match) {
          out.push_back(EntitySpan{e.id, start, start + m});
          for (int i = 0; i < m; ++i) used[static_cast<size_t>(start + i)] = 1;
          break;
        }
      }
    }
    return out;
  }

 private:
  ad::Mat init_state(const ad::Mat& enc) const {
    ad::Mat init_in(2 * cfg_.hidden, 1);
    init_in << enc.col(enc.cols() - 1).topRows(cfg_.hidden), enc.col(0).bottomRows(cfg_.hidden);
    return (w_init_->value * init_in + b_init_->value)
        .unaryExpr([](double a) { return std::tanh(a); });
  }

  ad::Mat step_logits(const ad::Mat& attn, const ad::Mat& state) const {
    ad::Mat scores = attn.transpose() * state;
    ad::Mat alpha = (scores.array() - scores.maxCoeff()).exp().matrix();
    alpha /= alpha.sum();
    ad::Mat context = attn * alpha;
    ad::Mat cat(2 * cfg_.hidden, 1);
    cat << state, context;
    ad::Mat comb =
        (w_comb_->value * cat + b_comb_->value).unaryExpr([](double a) { return std::tanh(a); });
    return embedding_->value.transpose() * comb + b_out_->value;
  }

  G2TConfig cfg_;
  int vocab_size_;
  ad::ParamSet params_;
  ad::Param* embedding_ = nullptr;
  nn::BiGruStack encoder_;
  ad::Param* w_proj_ = nullptr;
  ad::Param* w_init_ = nullptr;
  ad::Param* b_init_ = nullptr;
  ad::GruParams decoder_;
  ad::Param* w_comb_ = nullptr;
  ad::Param* b_comb_ = nullptr;
  ad::Param* b_out_ = nullptr;
};

// One gradient step on the mean batch loss; returns the pre-update loss.
inline double g2t_train_step(G2TModel& model,
                             const std::vector<std::pair<KnowledgeGraph, AnnotatedText>>& batch,
                             ad::Adam& opt, const TokenVocab& vocab) {
  if (batch.empty()) fail(ErrorCode::BAD_CONFIG, "empty training batch");
  model.params().zero_grad();
  double total = 0.0;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const auto& [graph, text] : batch) total += model.loss_backward(graph, text, vocab, w);
  const double mean = total / static_cast<double>(batch.size());
  if (!std::isfinite(mean) || !model.params().grads_finite()) {
    model.params().zero_grad();
    fail(ErrorCode::NONFINITE_LOSS, "non-finite loss or gradient in g2t step");
  }
  opt.step(model.params());
  return mean;
}

}  // namespace graphtext
