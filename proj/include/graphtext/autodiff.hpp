#pragma once

// Reverse-mode autodiff on a per-example tape, with Eigen doing the math.
// Parameters live outside the tape in a ParamSet; ops accumulate parameter
// gradients directly so a tape only holds activations. The GRU step is a
// single fused node; everything else is composed from small ops.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "graphtext/core.hpp"

namespace graphtext::ad {

using Mat = Eigen::MatrixXd;

inline bool all_finite(const Mat& m) { return m.allFinite(); }

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m;  // Adam first moment
  Mat v;  // Adam second moment
};

class ParamSet {
 public:
  Param& add(const std::string& name, int rows, int cols) {
    params_.emplace_back();
    Param& p = params_.back();
    p.name = name;
    p.value = Mat::Zero(rows, cols);
    p.grad = Mat::Zero(rows, cols);
    p.m = Mat::Zero(rows, cols);
    p.v = Mat::Zero(rows, cols);
    return p;
  }

  Param& add_glorot(const std::string& name, int rows, int cols, std::mt19937_64& rng) {
    Param& p = add(name, rows, cols);
    const double r = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> dist(-r, r);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) p.value(i, j) = dist(rng);
    return p;
  }

  Param& add_normal(const std::string& name, int rows, int cols, std::mt19937_64& rng,
                    double stddev) {
    Param& p = add(name, rows, cols);
    std::normal_distribution<double> dist(0.0, stddev);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) p.value(i, j) = dist(rng);
    return p;
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  bool grads_finite() const {
    for (const auto& p : params_)
      if (!p.grad.allFinite()) return false;
    return true;
  }

  uint64_t checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : params_) {
      h = fnv1a(p.name, h);
      h = fnv1a(p.value.data(), sizeof(double) * static_cast<size_t>(p.value.size()), h);
    }
    return h;
  }

  size_t count() const { return params_.size(); }
  std::deque<Param>& all() { return params_; }
  const std::deque<Param>& all() const { return params_; }

 private:
  std::deque<Param> params_;  // deque: stable addresses across add()
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamSet& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (auto& p : params.all()) {
      p.m = cfg_.beta1 * p.m + (1.0 - cfg_.beta1) * p.grad;
      p.v = cfg_.beta2 * p.v + (1.0 - cfg_.beta2) * p.grad.array().square().matrix();
      p.value.array() -=
          cfg_.lr * (p.m.array() / bc1) / ((p.v.array() / bc2).sqrt() + cfg_.eps);
    }
  }

  long steps() const { return t_; }
  void set_steps(long t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

struct GruParams {
  Param* Wz;
  Param* Uz;
  Param* bz;
  Param* Wr;
  Param* Ur;
  Param* br;
  Param* Wn;
  Param* Un;
  Param* bn;

  int hidden() const { return static_cast<int>(Wz->value.rows()); }
  int input() const { return static_cast<int>(Wz->value.cols()); }
};

inline GruParams make_gru(ParamSet& ps, const std::string& prefix, int input, int hidden,
                          std::mt19937_64& rng) {
  GruParams g;
  g.Wz = &ps.add_glorot(prefix + ".Wz", hidden, input, rng);
  g.Uz = &ps.add_glorot(prefix + ".Uz", hidden, hidden, rng);
  g.bz = &ps.add(prefix + ".bz", hidden, 1);
  g.Wr = &ps.add_glorot(prefix + ".Wr", hidden, input, rng);
  g.Ur = &ps.add_glorot(prefix + ".Ur", hidden, hidden, rng);
  g.br = &ps.add(prefix + ".br", hidden, 1);
  g.Wn = &ps.add_glorot(prefix + ".Wn", hidden, input, rng);
  g.Un = &ps.add_glorot(prefix + ".Un", hidden, hidden, rng);
  g.bn = &ps.add(prefix + ".bn", hidden, 1);
  return g;
}

struct GruCache {
  Mat z, r, n, unh;
};

// h' = (1 - z) . n + z . h
inline Mat gru_forward(const GruParams& p, const Mat& x, const Mat& h, GruCache* cache) {
  Mat z = (p.Wz->value * x + p.Uz->value * h + p.bz->value).unaryExpr(
      [](double a) { return 1.0 / (1.0 + std::exp(-a)); });
  Mat r = (p.Wr->value * x + p.Ur->value * h + p.br->value).unaryExpr(
      [](double a) { return 1.0 / (1.0 + std::exp(-a)); });
  Mat unh = p.Un->value * h;
  Mat n = (p.Wn->value * x + r.cwiseProduct(unh) + p.bn->value)
              .unaryExpr([](double a) { return std::tanh(a); });
  if (cache) {
    cache->z = z;
    cache->r = r;
    cache->n = n;
    cache->unh = unh;
  }
  return (Mat::Ones(z.rows(), 1) - z).cwiseProduct(n) + z.cwiseProduct(h);
}

class Tape {
 public:
  struct Var {
    int i = -1;
  };

  const Mat& val(Var v) const { return nodes_[static_cast<size_t>(v.i)].val; }
  Mat& grad(Var v) { return nodes_[static_cast<size_t>(v.i)].grad; }

  Var input(Mat v) { return push(std::move(v), {}); }

  Var add(Var a, Var b) {
    return push(val(a) + val(b), [a, b](Tape& t, const Mat& g) {
      t.grad(a) += g;
      t.grad(b) += g;
    });
  }

  Var sub(Var a, Var b) {
    return push(val(a) - val(b), [a, b](Tape& t, const Mat& g) {
      t.grad(a) += g;
      t.grad(b) -= g;
    });
  }

  Var cmul(Var a, Var b) {
    return push(val(a).cwiseProduct(val(b)), [a, b](Tape& t, const Mat& g) {
      t.grad(a) += g.cwiseProduct(t.val(b));
      t.grad(b) += g.cwiseProduct(t.val(a));
    });
  }

  Var scale(Var a, double s) {
    return push(val(a) * s, [a, s](Tape& t, const Mat& g) { t.grad(a) += g * s; });
  }

  Var tanh_(Var a) {
    Mat y = val(a).unaryExpr([](double x) { return std::tanh(x); });
    return push(std::move(y), [a](Tape& t, const Mat& g) {
      const Mat& y = t.val(t.last_);
      t.grad(a) += g.cwiseProduct((1.0 - y.array().square()).matrix());
    }, /*wants_self=*/true);
  }

  Var sigmoid_(Var a) {
    Mat y = val(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return push(std::move(y), [a](Tape& t, const Mat& g) {
      const Mat& y = t.val(t.last_);
      t.grad(a) += g.cwiseProduct((y.array() * (1.0 - y.array())).matrix());
    }, true);
  }

  // W x (+ b)
  Var matmul(Param& W, Var x) {
    return push(W.value * val(x), [&W, x](Tape& t, const Mat& g) {
      W.grad.noalias() += g * t.val(x).transpose();
      t.grad(x).noalias() += W.value.transpose() * g;
    });
  }

  Var affine(Param& W, Var x, Param& b) {
    return push(W.value * val(x) + b.value, [&W, &b, x](Tape& t, const Mat& g) {
      W.grad.noalias() += g * t.val(x).transpose();
      b.grad += g;
      t.grad(x).noalias() += W.value.transpose() * g;
    });
  }

  // Column `j` of the embedding table E (d x V).
  Var lookup(Param& E, int j) {
    return push(E.value.col(j), [&E, j](Tape&, const Mat& g) { E.grad.col(j) += g; });
  }

  // E^T x + b: output logits tied to the embedding table.
  Var tied_logits(Param& E, Var x, Param& b) {
    return push(E.value.transpose() * val(x) + b.value, [&E, &b, x](Tape& t, const Mat& g) {
      E.grad.noalias() += t.val(x) * g.transpose();
      b.grad += g;
      t.grad(x).noalias() += E.value * g;
    });
  }

  Var matmul_nn(Var a, Var b) {
    return push(val(a) * val(b), [a, b](Tape& t, const Mat& g) {
      t.grad(a).noalias() += g * t.val(b).transpose();
      t.grad(b).noalias() += t.val(a).transpose() * g;
    });
  }

  // A^T B without materializing the transpose.
  Var matmul_tn(Var a, Var b) {
    return push(val(a).transpose() * val(b), [a, b](Tape& t, const Mat& g) {
      t.grad(a).noalias() += t.val(b) * g.transpose();
      t.grad(b).noalias() += t.val(a) * g;
    });
  }

  // Rows [start, start+n) of a column vector or matrix.
  Var rows(Var a, int start, int n) {
    return push(val(a).middleRows(start, n), [a, start, n](Tape& t, const Mat& g) {
      t.grad(a).middleRows(start, n) += g;
    });
  }

  Var concat(Var a, Var b) {
    Mat y(val(a).rows() + val(b).rows(), 1);
    y << val(a), val(b);
    const int na = static_cast<int>(val(a).rows());
    return push(std::move(y), [a, b, na](Tape& t, const Mat& g) {
      t.grad(a) += g.topRows(na);
      t.grad(b) += g.bottomRows(g.rows() - na);
    });
  }

  Var hstack(const std::vector<Var>& cols) {
    Mat y(val(cols.front()).rows(), static_cast<Eigen::Index>(cols.size()));
    for (size_t k = 0; k < cols.size(); ++k) y.col(static_cast<Eigen::Index>(k)) = val(cols[k]);
    return push(std::move(y), [cols](Tape& t, const Mat& g) {
      for (size_t k = 0; k < cols.size(); ++k)
        t.grad(cols[k]) += g.col(static_cast<Eigen::Index>(k));
    });
  }

  Var mean_cols(Var h, int start, int end) {
    const double inv = 1.0 / (end - start);
    Mat y = val(h).middleCols(start, end - start).rowwise().sum() * inv;
    return push(std::move(y), [h, start, end, inv](Tape& t, const Mat& g) {
      for (int j = start; j < end; ++j) t.grad(h).col(j) += g * inv;
    });
  }

  Var softmax_col(Var a) {
    const Mat& x = val(a);
    Mat y = (x.array() - x.maxCoeff()).exp().matrix();
    y /= y.sum();
    return push(std::move(y), [a](Tape& t, const Mat& g) {
      const Mat& y = t.val(t.last_);
      const double dot = (y.array() * g.array()).sum();
      t.grad(a) += (y.array() * (g.array() - dot)).matrix();
    }, true);
  }

  // Scalar negative log-likelihood of `target` under softmax(logits).
  Var cross_entropy(Var logits, int target) {
    const Mat& x = val(logits);
    const double mx = x.maxCoeff();
    const double lse = mx + std::log((x.array() - mx).exp().sum());
    Mat y(1, 1);
    y(0, 0) = lse - x(target, 0);
    Mat soft = (x.array() - lse).exp().matrix();
    return push(std::move(y), [logits, target, soft](Tape& t, const Mat& g) {
      Mat d = soft * g(0, 0);
      d(target, 0) -= g(0, 0);
      t.grad(logits) += d;
    });
  }

  Var average(const std::vector<Var>& scalars) {
    Mat y(1, 1);
    double s = 0.0;
    for (Var v : scalars) s += val(v)(0, 0);
    y(0, 0) = s / static_cast<double>(scalars.size());
    const double inv = 1.0 / static_cast<double>(scalars.size());
    return push(std::move(y), [scalars, inv](Tape& t, const Mat& g) {
      for (Var v : scalars) t.grad(v)(0, 0) += g(0, 0) * inv;
    });
  }

  // Fused GRU step; gradients flow to x, h and the cell parameters.
  Var gru(GruParams& p, Var x, Var h) {
    GruCache c;
    Mat out = gru_forward(p, val(x), val(h), &c);
    return push(std::move(out), [&p, x, h, c](Tape& t, const Mat& g) {
      const Mat& hv = t.val(h);
      const Mat& xv = t.val(x);
      Mat dn = g.cwiseProduct((1.0 - c.z.array()).matrix());
      Mat dz = g.cwiseProduct(hv - c.n);
      Mat dh = g.cwiseProduct(c.z);
      Mat dan = dn.cwiseProduct((1.0 - c.n.array().square()).matrix());
      Mat dr = dan.cwiseProduct(c.unh);
      Mat dunh = dan.cwiseProduct(c.r);
      Mat dar = dr.cwiseProduct((c.r.array() * (1.0 - c.r.array())).matrix());
      Mat daz = dz.cwiseProduct((c.z.array() * (1.0 - c.z.array())).matrix());

      p.Wn->grad.noalias() += dan * xv.transpose();
      p.bn->grad += dan;
      p.Un->grad.noalias() += dunh * hv.transpose();
      p.Wr->grad.noalias() += dar * xv.transpose();
      p.Ur->grad.noalias() += dar * hv.transpose();
      p.br->grad += dar;
      p.Wz->grad.noalias() += daz * xv.transpose();
      p.Uz->grad.noalias() += daz * hv.transpose();
      p.bz->grad += daz;

      Mat dx = p.Wn->value.transpose() * dan;
      dx.noalias() += p.Wr->value.transpose() * dar;
      dx.noalias() += p.Wz->value.transpose() * daz;
      t.grad(x) += dx;

      dh.noalias() += p.Un->value.transpose() * dunh;
      dh.noalias() += p.Ur->value.transpose() * dar;
      dh.noalias() += p.Uz->value.transpose() * daz;
      t.grad(h) += dh;
    });
  }

  // Seeds d(loss) = 1 and sweeps the tape in reverse. Returns the loss value.
  double backward(Var loss) {
    for (auto& n : nodes_) n.grad = Mat::Zero(n.val.rows(), n.val.cols());
    nodes_[static_cast<size_t>(loss.i)].grad(0, 0) = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      auto& n = nodes_[static_cast<size_t>(i)];
      if (n.back) {
        last_ = Var{i};
        n.back(*this, n.grad);
      }
    }
    return nodes_[static_cast<size_t>(loss.i)].val(0, 0);
  }

  size_t size() const { return nodes_.size(); }

 private:
  friend class TapeAccess;
  struct Node {
    Mat val;
    Mat grad;
    std::function<void(Tape&, const Mat&)> back;
  };

  Var push(Mat v, std::function<void(Tape&, const Mat&)> back, bool wants_self = false) {
    (void)wants_self;
    nodes_.push_back(Node{std::move(v), Mat(), std::move(back)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  Var last_;  // node whose backward is currently running
};

using Var = Tape::Var;

}  // namespace graphtext::ad
