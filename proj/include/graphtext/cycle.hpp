#pragma once

// Iterative back translation over non-parallel text and graph data. The two
// cycles are alternated: the text cycle decodes graphs from texts with the
// frozen T2G model and trains G2T on the synthetic pairs; the graph cycle
// decodes texts from graphs with the frozen G2T model and trains T2G. The
// intermediate structures crossing the boundary are always discrete.

#include <chrono>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "graphtext/core.hpp"
#include "graphtext/data.hpp"
#include "graphtext/g2t.hpp"
#include "graphtext/metrics.hpp"
#include "graphtext/t2g.hpp"

namespace graphtext {

enum class Alternation { PER_BATCH, PER_EPOCH };

struct ScheduleConfig {
  int epochs = 30;
  int batch_size = 16;
  Alternation alternation = Alternation::PER_BATCH;
  double lr_g2t = 1e-3;
  double lr_t2g = 1e-3;
  DecodeConfig decode;
};

enum class PairOrigin { FROM_TEXT, FROM_GRAPH };

struct SyntheticPair {
  AnnotatedText text;
  KnowledgeGraph graph;
  PairOrigin origin = PairOrigin::FROM_TEXT;
};

struct ModelConfig {
  G2TConfig g2t;
  T2GConfig t2g;
};

struct TrainState {
  TrainState(TokenVocab vocab_in, RelationVocab relations_in, ModelConfig models,
             ScheduleConfig schedule_in, uint64_t seed_in)
      : vocab(std::move(vocab_in)),
        relations(std::move(relations_in)),
        g2t(vocab.size(), models.g2t, fnv1a("g2t-init", seed_in)),
        t2g(vocab.size(), relations.size(), models.t2g, fnv1a("t2g-init", seed_in)),
        opt_g2t(ad::AdamConfig{schedule_in.lr_g2t}),
        opt_t2g(ad::AdamConfig{schedule_in.lr_t2g}),
        schedule(schedule_in),
        seed(seed_in),
        rng(fnv1a("trainer", seed_in)) {}

  TrainState(const TrainState&) = delete;
  TrainState& operator=(const TrainState&) = delete;

  TokenVocab vocab;
  RelationVocab relations;
  G2TModel g2t;
  T2GModel t2g;
  ad::Adam opt_g2t;
  ad::Adam opt_t2g;
  ScheduleConfig schedule;
  long epoch = 0;
  long step = 0;
  uint64_t seed = 0;
  std::mt19937_64 rng;
};

// Non-empty input for G2T when the frozen T2G predicts no edges at all.
inline KnowledgeGraph sentinel_graph() {
  const std::string& unk = reserved_tokens()[tok::kUnk];
  Entity head{{unk}, unk + "#head"};
  Entity tail{{unk}, unk + "#tail"};
  KnowledgeGraph g;
  g.triples.push_back(Triple{head, Relation{unk}, tail});
  g.entities = {head, tail};
  return g;
}

// Entities of `g` that the decoded text misses get their surface tokens
// appended, so the T2G gold construction never sees an entity mismatch.
// Evaluation paths never use this repair.
inline AnnotatedText repair_entity_spans(AnnotatedText text, const KnowledgeGraph& g) {
  std::unordered_set<std::string> have;
  for (const auto& s : text.entity_spans) have.insert(s.entity_id);
  for (const auto& e : g.entities) {
    if (have.count(e.id)) continue;
    const int start = static_cast<int>(text.tokens.size());
    text.tokens.insert(text.tokens.end(), e.tokens.begin(), e.tokens.end());
    text.entity_spans.push_back(EntitySpan{e.id, start, start + static_cast<int>(e.tokens.size())});
  }
  return text;
}

// L_CycT: back-translate each text through the frozen T2G model and train
// G2T on the resulting (graph, text) pairs. Only theta changes.
inline double text_cycle_step(TrainState& st, const std::vector<const AnnotatedText*>& batch) {
  if (batch.empty()) fail(ErrorCode::BAD_CONFIG, "empty text-cycle batch");
  std::vector<std::pair<KnowledgeGraph, AnnotatedText>> pairs;
  pairs.reserve(batch.size());
  for (const AnnotatedText* t : batch) {
    KnowledgeGraph guess = st.t2g.predict(*t, st.vocab, st.relations);
    if (guess.triples.empty()) guess = sentinel_graph();
    pairs.emplace_back(std::move(guess), *t);
  }
  const double loss = g2t_train_step(st.g2t, pairs, st.opt_g2t, st.vocab);
  ++st.step;
  return loss;
}

// L_CycG: decode each graph through the frozen G2T model and train T2G on
// the resulting (text, graph) pairs. Only phi changes.
inline double graph_cycle_step(TrainState& st, const std::vector<const KnowledgeGraph*>& batch) {
  if (batch.empty()) fail(ErrorCode::BAD_CONFIG, "empty graph-cycle batch");
  std::vector<std::pair<AnnotatedText, KnowledgeGraph>> pairs;
  pairs.reserve(batch.size());
  for (const KnowledgeGraph* g : batch) {
    AnnotatedText decoded =
        repair_entity_spans(st.g2t.generate(*g, st.vocab, st.schedule.decode), *g);
    pairs.emplace_back(std::move(decoded), *g);
  }
  const double loss = t2g_train_step(st.t2g, pairs, st.opt_t2g, st.vocab, st.relations);
  ++st.step;
  return loss;
}

// Materialized D_Pair approximation under the current frozen models.
inline std::vector<SyntheticPair> build_synthetic_pairs(const NonParallelDataset& data,
                                                        const TrainState& st) {
  std::vector<SyntheticPair> out;
  out.reserve(data.texts.size() + data.graphs.size());
  for (const auto& t : data.texts)
    out.push_back(SyntheticPair{t, st.t2g.predict(t, st.vocab, st.relations), PairOrigin::FROM_TEXT});
  for (const auto& g : data.graphs)
    out.push_back(SyntheticPair{st.g2t.generate(g, st.vocab, st.schedule.decode), g,
                                PairOrigin::FROM_GRAPH});
  return out;
}

struct EpochMetrics {
  long epoch = 0;
  double l_cyct_mean = 0.0;
  double l_cycg_mean = 0.0;
  bool has_dev = false;
  metrics::TextEvalReport text;
  metrics::GraphEvalReport graph;
  double wall_clock_s = 0.0;
  bool is_best = false;
};

using MetricsSink = std::function<void(const EpochMetrics&)>;
using CheckpointSink = std::function<void(const TrainState&, const std::string& tag, bool best)>;

inline std::pair<metrics::TextEvalReport, metrics::GraphEvalReport> evaluate_on_pairs(
    const TrainState& st, const ParallelDataset& pairs) {
  std::vector<metrics::Sentence> hyps;
  std::vector<metrics::RefList> refs;
  std::vector<KnowledgeGraph> preds, golds;
  for (const auto& [g, t] : pairs.pairs) {
    hyps.push_back(st.g2t.generate(g, st.vocab, st.schedule.decode).tokens);
    refs.push_back({t.tokens});
    preds.push_back(st.t2g.predict(t, st.vocab, st.relations));
    golds.push_back(g);
  }
  return {metrics::evaluate_text(hyps, refs), metrics::edge_f1(preds, golds)};
}

namespace detail {

template <typename T>
std::vector<const T*> slice(const std::vector<T>& items, const std::vector<size_t>& order,
                            size_t batch, int batch_size) {
  std::vector<const T*> out;
  out.reserve(static_cast<size_t>(batch_size));
  for (int k = 0; k < batch_size; ++k)
    out.push_back(&items[order[(batch * static_cast<size_t>(batch_size) + static_cast<size_t>(k)) %
                               order.size()]]);
  return out;
}

inline std::vector<size_t> shuffled_indices(size_t n, std::mt19937_64& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace detail

// The IBT loop. Shuffles the two sides independently every epoch, alternates
// the cycle steps at the configured granularity, evaluates on the dev pairs
// (never trains on them) and reports one EpochMetrics per epoch.
inline std::vector<EpochMetrics> train(const NonParallelDataset& data, TrainState& st,
                                       const ParallelDataset* dev = nullptr,
                                       const MetricsSink& on_metrics = {},
                                       const CheckpointSink& on_checkpoint = {}) {
  if (data.texts.empty() || data.graphs.empty())
    fail(ErrorCode::BAD_CONFIG, "both non-parallel sides must be non-empty");
  std::vector<EpochMetrics> log;
  double best_score = -1.0;
  const int bs = st.schedule.batch_size;
  const size_t text_batches = (data.texts.size() + static_cast<size_t>(bs) - 1) / static_cast<size_t>(bs);
  const size_t graph_batches = (data.graphs.size() + static_cast<size_t>(bs) - 1) / static_cast<size_t>(bs);
  const size_t n_batches = std::max(text_batches, graph_batches);

  for (int e = 0; e < st.schedule.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    auto text_order = detail::shuffled_indices(data.texts.size(), st.rng);
    auto graph_order = detail::shuffled_indices(data.graphs.size(), st.rng);
    double sum_t = 0.0, sum_g = 0.0;
    try {
      if (st.schedule.alternation == Alternation::PER_BATCH) {
        for (size_t b = 0; b < n_batches; ++b) {
          sum_t += text_cycle_step(st, detail::slice(data.texts, text_order, b, bs));
          sum_g += graph_cycle_step(st, detail::slice(data.graphs, graph_order, b, bs));
        }
      } else {
        for (size_t b = 0; b < n_batches; ++b)
          sum_t += text_cycle_step(st, detail::slice(data.texts, text_order, b, bs));
        for (size_t b = 0; b < n_batches; ++b)
          sum_g += graph_cycle_step(st, detail::slice(data.graphs, graph_order, b, bs));
      }
    } catch (const Error&) {
      if (on_checkpoint) on_checkpoint(st, "abort", false);
      throw;
    }
    ++st.epoch;

    EpochMetrics m;
    m.epoch = st.epoch;
    m.l_cyct_mean = sum_t / static_cast<double>(n_batches);
    m.l_cycg_mean = sum_g / static_cast<double>(n_batches);
    if (dev) {
      auto [text_rep, graph_rep] = evaluate_on_pairs(st, *dev);
      m.has_dev = true;
      m.text = text_rep;
      m.graph = graph_rep;
      const double score = m.text.bleu + m.graph.micro_f1;
      if (score > best_score) {
        best_score = score;
        m.is_best = true;
      }
    } else {
      m.is_best = true;  // without dev data the latest state is the best guess
    }
    m.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(m);
    if (on_metrics) on_metrics(m);
    if (on_checkpoint) {
      char tag[32];
      std::snprintf(tag, sizeof(tag), "epoch_%03ld", st.epoch);
      on_checkpoint(st, tag, m.is_best);
    }
  }
  return log;
}

// Ablation: run only one of the two cycles; the other model stays at its
// initialization. `text_cycle` trains theta only, otherwise phi only.
inline std::vector<EpochMetrics> train_one_cycle(const NonParallelDataset& data, TrainState& st,
                                                 bool text_cycle,
                                                 const ParallelDataset* dev = nullptr,
                                                 const MetricsSink& on_metrics = {},
                                                 const CheckpointSink& on_checkpoint = {}) {
  if (data.texts.empty() || data.graphs.empty())
    fail(ErrorCode::BAD_CONFIG, "both non-parallel sides must be non-empty");
  std::vector<EpochMetrics> log;
  double best_score = -1.0;
  const int bs = st.schedule.batch_size;
  const size_t n_items = text_cycle ? data.texts.size() : data.graphs.size();
  const size_t n_batches = (n_items + static_cast<size_t>(bs) - 1) / static_cast<size_t>(bs);

  for (int e = 0; e < st.schedule.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = detail::shuffled_indices(n_items, st.rng);
    double sum = 0.0;
    try {
      for (size_t b = 0; b < n_batches; ++b) {
        if (text_cycle)
          sum += text_cycle_step(st, detail::slice(data.texts, order, b, bs));
        else
          sum += graph_cycle_step(st, detail::slice(data.graphs, order, b, bs));
      }
    } catch (const Error&) {
      if (on_checkpoint) on_checkpoint(st, "abort", false);
      throw;
    }
    ++st.epoch;

    EpochMetrics m;
    m.epoch = st.epoch;
    (text_cycle ? m.l_cyct_mean : m.l_cycg_mean) = sum / static_cast<double>(n_batches);
    if (dev) {
      auto [text_rep, graph_rep] = evaluate_on_pairs(st, *dev);
      m.has_dev = true;
      m.text = text_rep;
      m.graph = graph_rep;
      const double score = m.text.bleu + m.graph.micro_f1;
      if (score > best_score) {
        best_score = score;
        m.is_best = true;
      }
    } else {
      m.is_best = true;
    }
    m.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(m);
    if (on_metrics) on_metrics(m);
    if (on_checkpoint) {
      char tag[32];
      std::snprintf(tag, sizeof(tag), "epoch_%03ld", st.epoch);
      on_checkpoint(st, tag, m.is_best);
    }
  }
  return log;
}

// Supervised reference training on parallel pairs with the same loop shape;
// the loss slots hold the two supervised losses.
inline std::vector<EpochMetrics> train_supervised(const ParallelDataset& pairs, TrainState& st,
                                                  const ParallelDataset* dev = nullptr,
                                                  const MetricsSink& on_metrics = {},
                                                  const CheckpointSink& on_checkpoint = {}) {
  if (pairs.pairs.empty()) fail(ErrorCode::BAD_CONFIG, "empty supervised dataset");
  std::vector<EpochMetrics> log;
  double best_score = -1.0;
  const int bs = st.schedule.batch_size;
  const size_t n_batches = (pairs.size() + static_cast<size_t>(bs) - 1) / static_cast<size_t>(bs);

  for (int e = 0; e < st.schedule.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = detail::shuffled_indices(pairs.size(), st.rng);
    double sum_t = 0.0, sum_g = 0.0;
    try {
      for (size_t b = 0; b < n_batches; ++b) {
        std::vector<std::pair<KnowledgeGraph, AnnotatedText>> gt;
        std::vector<std::pair<AnnotatedText, KnowledgeGraph>> tg;
        for (int k = 0; k < bs; ++k) {
          const auto& [g, t] =
              pairs.pairs[order[(b * static_cast<size_t>(bs) + static_cast<size_t>(k)) % order.size()]];
          gt.emplace_back(g, t);
          tg.emplace_back(t, g);
        }
        sum_t += g2t_train_step(st.g2t, gt, st.opt_g2t, st.vocab);
        sum_g += t2g_train_step(st.t2g, tg, st.opt_t2g, st.vocab, st.relations);
        st.step += 2;
      }
    } catch (const Error&) {
      if (on_checkpoint) on_checkpoint(st, "abort", false);
      throw;
    }
    ++st.epoch;

    EpochMetrics m;
    m.epoch = st.epoch;
    m.l_cyct_mean = sum_t / static_cast<double>(n_batches);
    m.l_cycg_mean = sum_g / static_cast<double>(n_batches);
    if (dev) {
      auto [text_rep, graph_rep] = evaluate_on_pairs(st, *dev);
      m.has_dev = true;
      m.text = text_rep;
      m.graph = graph_rep;
      const double score = m.text.bleu + m.graph.micro_f1;
      if (score > best_score) {
        best_score = score;
        m.is_best = true;
      }
    } else {
      m.is_best = true;
    }
    m.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.push_back(m);
    if (on_metrics) on_metrics(m);
    if (on_checkpoint) {
      char tag[32];
      std::snprintf(tag, sizeof(tag), "epoch_%03ld", st.epoch);
      on_checkpoint(st, tag, m.is_best);
    }
  }
  return log;
}

}  // namespace graphtext
