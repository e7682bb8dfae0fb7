#pragma once

// Recurrent building blocks shared by the two trainable components.

#include <string>
#include <vector>

#include "graphtext/autodiff.hpp"

namespace graphtext::nn {

using ad::Mat;
using ad::Var;

// Stacked bidirectional GRU. Layer 0 consumes `input` columns, deeper layers
// consume the 2*hidden outputs of the previous layer.
struct BiGruStack {
  std::vector<ad::GruParams> fwd;
  std::vector<ad::GruParams> bwd;
  int hidden = 0;

  int layers() const { return static_cast<int>(fwd.size()); }
  int output_dim() const { return 2 * hidden; }
};

inline BiGruStack make_bigru(ad::ParamSet& ps, const std::string& prefix, int input,
                             int hidden, int layers, std::mt19937_64& rng) {
  BiGruStack s;
  s.hidden = hidden;
  for (int l = 0; l < layers; ++l) {
    const int in = l == 0 ? input : 2 * hidden;
    s.fwd.push_back(ad::make_gru(ps, prefix + ".l" + std::to_string(l) + ".fwd", in, hidden, rng));
    s.bwd.push_back(ad::make_gru(ps, prefix + ".l" + std::to_string(l) + ".bwd", in, hidden, rng));
  }
  return s;
}

// Forward-only pass; X holds one input column per position. Returns 2h x T.
inline Mat bigru_forward(const BiGruStack& s, const Mat& X) {
  const int T = static_cast<int>(X.cols());
  Mat in = X;
  Mat out;
  for (int l = 0; l < s.layers(); ++l) {
    out = Mat(2 * s.hidden, T);
    Mat h = Mat::Zero(s.hidden, 1);
    for (int t = 0; t < T; ++t) {
      h = ad::gru_forward(s.fwd[static_cast<size_t>(l)], in.col(t), h, nullptr);
      out.col(t).topRows(s.hidden) = h;
    }
    h = Mat::Zero(s.hidden, 1);
    for (int t = T - 1; t >= 0; --t) {
      h = ad::gru_forward(s.bwd[static_cast<size_t>(l)], in.col(t), h, nullptr);
      out.col(t).bottomRows(s.hidden) = h;
    }
    in = out;
  }
  return out;
}

// Tape pass mirroring bigru_forward; returns the per-position output columns.
inline std::vector<Var> bigru_tape(ad::Tape& tape, BiGruStack& s, const std::vector<Var>& xs) {
  const int T = static_cast<int>(xs.size());
  std::vector<Var> in = xs;
  std::vector<Var> out;
  for (int l = 0; l < s.layers(); ++l) {
    std::vector<Var> f(static_cast<size_t>(T)), b(static_cast<size_t>(T));
    Var h = tape.input(Mat::Zero(s.hidden, 1));
    for (int t = 0; t < T; ++t) {
      h = tape.gru(s.fwd[static_cast<size_t>(l)], in[static_cast<size_t>(t)], h);
      f[static_cast<size_t>(t)] = h;
    }
    h = tape.input(Mat::Zero(s.hidden, 1));
    for (int t = T - 1; t >= 0; --t) {
      h = tape.gru(s.bwd[static_cast<size_t>(l)], in[static_cast<size_t>(t)], h);
      b[static_cast<size_t>(t)] = h;
    }
    out.clear();
    out.reserve(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t)
      out.push_back(tape.concat(f[static_cast<size_t>(t)], b[static_cast<size_t>(t)]));
    in = out;
  }
  return out;
}

inline Mat embed_forward(const ad::Param& E, const std::vector<int>& ids) {
  Mat X(E.value.rows(), static_cast<Eigen::Index>(ids.size()));
  for (size_t i = 0; i < ids.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = E.value.col(ids[i]);
  return X;
}

inline std::vector<Var> embed_tape(ad::Tape& tape, ad::Param& E, const std::vector<int>& ids) {
  std::vector<Var> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(tape.lookup(E, id));
  return out;
}

}  // namespace graphtext::nn
