#pragma once

// Evaluation suite: corpus BLEU-4, ROUGE-L and CIDEr over token sequences,
// micro/macro F1 over edge relation types for graphs. Values are checked
// against fixtures produced by independent reference implementations
// (scripts/make_metric_fixtures.py).

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "graphtext/core.hpp"

namespace graphtext::metrics {

using Sentence = std::vector<std::string>;
using RefList = std::vector<Sentence>;

constexpr double kRougeBeta = 1.2;
constexpr double kCiderSigma = 6.0;
constexpr int kMaxNgram = 4;

struct TextEvalReport {
  double bleu = 0.0;     // [0, 100]
  double rouge_l = 0.0;  // [0, 100]
  double cider = 0.0;    // >= 0
};

struct RelationCounts {
  std::string label;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct GraphEvalReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
  std::vector<RelationCounts> per_relation;  // label-sorted, gold and predicted labels
};

namespace detail {

inline void check_aligned(size_t h, size_t r, const char* what) {
  if (h != r) fail(ErrorCode::LENGTH_MISMATCH, std::string(what) + ": item counts differ");
}

inline std::unordered_map<std::string, int> ngram_counts(const Sentence& s, int n) {
  std::unordered_map<std::string, int> out;
  if (static_cast<int>(s.size()) < n) return out;
  for (size_t i = 0; i + static_cast<size_t>(n) <= s.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      key += s[i + static_cast<size_t>(j)];
      key += '\x1f';
    }
    ++out[key];
  }
  return out;
}

inline int lcs_length(const Sentence& a, const Sentence& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 0; i < a.size(); ++i) {
    cur[0] = 0;
    for (size_t j = 0; j < b.size(); ++j)
      cur[j + 1] = a[i] == b[j] ? prev[j] + 1 : std::max(cur[j], prev[j + 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

// Corpus BLEU-4: clipped n-gram precision, no smoothing, brevity penalty
// with the closest reference length (ties -> shorter).
inline double corpus_bleu(const std::vector<Sentence>& hyps, const std::vector<RefList>& refs) {
  detail::check_aligned(hyps.size(), refs.size(), "corpus_bleu");
  long num[kMaxNgram] = {0, 0, 0, 0};
  long den[kMaxNgram] = {0, 0, 0, 0};
  long hyp_len = 0, ref_len = 0;
  for (size_t i = 0; i < hyps.size(); ++i) {
    if (refs[i].empty()) fail(ErrorCode::LENGTH_MISMATCH, "corpus_bleu: empty reference list");
    const auto& hyp = hyps[i];
    hyp_len += static_cast<long>(hyp.size());
    long best_ref = static_cast<long>(refs[i][0].size());
    for (const auto& r : refs[i]) {
      const long len = static_cast<long>(r.size());
      const long d_new = std::labs(len - static_cast<long>(hyp.size()));
      const long d_old = std::labs(best_ref - static_cast<long>(hyp.size()));
      if (d_new < d_old || (d_new == d_old && len < best_ref)) best_ref = len;
    }
    ref_len += best_ref;
    for (int n = 1; n <= kMaxNgram; ++n) {
      auto hyp_counts = detail::ngram_counts(hyp, n);
      std::unordered_map<std::string, int> max_ref;
      for (const auto& r : refs[i])
        for (const auto& [gram, c] : detail::ngram_counts(r, n))
          max_ref[gram] = std::max(max_ref[gram], c);
      for (const auto& [gram, c] : hyp_counts) {
        auto it = max_ref.find(gram);
        num[n - 1] += std::min(c, it == max_ref.end() ? 0 : it->second);
      }
      den[n - 1] += std::max<long>(0, static_cast<long>(hyp.size()) - n + 1);
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < kMaxNgram; ++n) {
    if (den[n] == 0 || num[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(num[n]) / static_cast<double>(den[n]));
  }
  const double bp =
      hyp_len > ref_len ? 1.0
                        : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  return 100.0 * bp * std::exp(log_sum / kMaxNgram);
}

// ROUGE-L: per item the best reference LCS F-measure (beta = 1.2), corpus
// score is the item mean, scaled to [0, 100].
inline double rouge_l(const std::vector<Sentence>& hyps, const std::vector<RefList>& refs) {
  detail::check_aligned(hyps.size(), refs.size(), "rouge_l");
  if (hyps.empty()) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < hyps.size(); ++i) {
    if (refs[i].empty()) fail(ErrorCode::LENGTH_MISMATCH, "rouge_l: empty reference list");
    double best = 0.0;
    for (const auto& r : refs[i]) {
      const int lcs = detail::lcs_length(hyps[i], r);
      if (lcs == 0) continue;
      const double p = static_cast<double>(lcs) / static_cast<double>(hyps[i].size());
      const double q = static_cast<double>(lcs) / static_cast<double>(r.size());
      const double b2 = kRougeBeta * kRougeBeta;
      best = std::max(best, (1.0 + b2) * p * q / (q + b2 * p));
    }
    total += best;
  }
  return 100.0 * total / static_cast<double>(hyps.size());
}

// CIDEr: tf-idf n-gram cosine with clipped hypothesis counts and a Gaussian
// length penalty, averaged over n = 1..4 and references, scaled by 10. The
// idf base and the length totals follow the reference scorer (one document
// per item; lengths count bigrams).
inline double cider(const std::vector<Sentence>& hyps, const std::vector<RefList>& refs) {
  detail::check_aligned(hyps.size(), refs.size(), "cider");
  if (hyps.size() < 2)
    fail(ErrorCode::DEGENERATE_IDF, "cider needs at least two corpus items");
  std::unordered_map<std::string, int> df;
  for (const auto& ref_list : refs) {
    if (ref_list.empty()) fail(ErrorCode::LENGTH_MISMATCH, "cider: empty reference list");
    std::unordered_set<std::string> seen;
    for (const auto& r : ref_list)
      for (int n = 1; n <= kMaxNgram; ++n)
        for (const auto& [gram, c] : detail::ngram_counts(r, n)) seen.insert(gram + char('0' + n));
    for (const auto& g : seen) ++df[g];
  }
  const double corpus_log = std::log(static_cast<double>(hyps.size()));

  struct Vec {
    std::unordered_map<std::string, double> w[kMaxNgram];
    double norm[kMaxNgram] = {0, 0, 0, 0};
    double length = 0;
  };
  auto to_vec = [&](const Sentence& s) {
    Vec v;
    for (int n = 1; n <= kMaxNgram; ++n) {
      for (const auto& [gram, tf] : detail::ngram_counts(s, n)) {
        auto it = df.find(gram + char('0' + n));
        const double idf = corpus_log - std::log(std::max(1.0, it == df.end() ? 0.0 : double(it->second)));
        const double w = tf * idf;
        v.w[n - 1][gram] = w;
        v.norm[n - 1] += w * w;
        if (n == 2) v.length += tf;
      }
      v.norm[n - 1] = std::sqrt(v.norm[n - 1]);
    }
    return v;
  };

  double total = 0.0;
  for (size_t i = 0; i < hyps.size(); ++i) {
    const Vec hv = to_vec(hyps[i]);
    double acc = 0.0;
    for (const auto& r : refs[i]) {
      const Vec rv = to_vec(r);
      const double delta = hv.length - rv.length;
      const double penalty = std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
      for (int n = 0; n < kMaxNgram; ++n) {
        double val = 0.0;
        for (const auto& [gram, w] : hv.w[n]) {
          auto it = rv.w[n].find(gram);
          if (it != rv.w[n].end()) val += std::min(w, it->second) * it->second;
        }
        if (hv.norm[n] != 0.0 && rv.norm[n] != 0.0) val /= hv.norm[n] * rv.norm[n];
        acc += val * penalty;
      }
    }
    total += acc / kMaxNgram / static_cast<double>(refs[i].size()) * 10.0;
  }
  return total / static_cast<double>(hyps.size());
}

inline TextEvalReport evaluate_text(const std::vector<Sentence>& hyps,
                                    const std::vector<RefList>& refs) {
  TextEvalReport r;
  r.bleu = corpus_bleu(hyps, refs);
  r.rouge_l = rouge_l(hyps, refs);
  r.cider = hyps.size() >= 2 ? cider(hyps, refs) : 0.0;
  return r;
}

// Micro/macro F1 over exact (head_id, relation, tail_id) matches, graphs
// aligned by index; macro averages over relations present in gold.
inline GraphEvalReport edge_f1(const std::vector<KnowledgeGraph>& predicted,
                               const std::vector<KnowledgeGraph>& gold) {
  detail::check_aligned(predicted.size(), gold.size(), "edge_f1");
  std::map<std::string, RelationCounts> table;
  std::unordered_set<std::string> gold_labels;
  auto triple_key = [](const Triple& t) {
    return t.head.id + "\x1f" + t.relation.label + "\x1f" + t.tail.id;
  };
  for (size_t i = 0; i < predicted.size(); ++i) {
    std::unordered_map<std::string, const Triple*> gold_set;
    for (const auto& t : gold[i].triples) {
      gold_set.emplace(triple_key(t), &t);
      gold_labels.insert(t.relation.label);
    }
    std::unordered_set<std::string> pred_keys;
    for (const auto& t : predicted[i].triples) {
      if (!pred_keys.insert(triple_key(t)).second) continue;  // ignore duplicates
      auto& row = table[t.relation.label];
      row.label = t.relation.label;
      if (gold_set.count(triple_key(t)))
        ++row.tp;
      else
        ++row.fp;
    }
    for (const auto& [key, t] : gold_set) {
      if (!pred_keys.count(key)) {
        auto& row = table[t->relation.label];
        row.label = t->relation.label;
        ++row.fn;
      }
    }
  }

  GraphEvalReport rep;
  double macro_sum = 0.0;
  long macro_n = 0;
  for (auto& [label, row] : table) {
    rep.tp += row.tp;
    rep.fp += row.fp;
    rep.fn += row.fn;
    row.precision = row.tp + row.fp > 0 ? double(row.tp) / double(row.tp + row.fp) : 0.0;
    row.recall = row.tp + row.fn > 0 ? double(row.tp) / double(row.tp + row.fn) : 0.0;
    row.f1 = row.precision + row.recall > 0.0
                 ? 2.0 * row.precision * row.recall / (row.precision + row.recall)
                 : 0.0;
    if (gold_labels.count(label)) {
      macro_sum += row.f1;
      ++macro_n;
    }
    rep.per_relation.push_back(row);
  }
  rep.micro_precision = rep.tp + rep.fp > 0 ? double(rep.tp) / double(rep.tp + rep.fp) : 0.0;
  rep.micro_recall = rep.tp + rep.fn > 0 ? double(rep.tp) / double(rep.tp + rep.fn) : 0.0;
  rep.micro_f1 = rep.micro_precision + rep.micro_recall > 0.0
                     ? 2.0 * rep.micro_precision * rep.micro_recall /
                           (rep.micro_precision + rep.micro_recall)
                     : 0.0;
  rep.macro_f1 = macro_n > 0 ? macro_sum / static_cast<double>(macro_n) : 0.0;
  return rep;
}

}  // namespace graphtext::metrics
