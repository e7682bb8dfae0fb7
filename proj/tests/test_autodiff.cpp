#include <catch_amalgamated.hpp>

#include <random>

#include "graphtext/autodiff.hpp"
#include "graphtext/nn.hpp"

using namespace graphtext;
using ad::Mat;
using ad::Var;

namespace {

// Central finite differences over every entry of every parameter.
template <class BuildLoss>
void check_gradients(ad::ParamSet& ps, BuildLoss build, double step = 1e-5) {
  ps.zero_grad();
  {
    ad::Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
  }
  for (auto& p : ps.all()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + step;
      double up;
      {
        ad::Tape tape;
        up = tape.val(build(tape))(0, 0);
      }
      p.value.data()[i] = orig - step;
      double down;
      {
        ad::Tape tape;
        down = tape.val(build(tape))(0, 0);
      }
      p.value.data()[i] = orig;
      const double fd = (up - down) / (2.0 * step);
      const double got = p.grad.data()[i];
      const double tol = 1e-7 + 1e-4 * std::max(std::abs(fd), std::abs(got));
      INFO(p.name << "[" << i << "] fd=" << fd << " ad=" << got);
      REQUIRE(std::abs(fd - got) < tol);
    }
  }
}

Mat random_mat(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Mat m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = d(rng);
  return m;
}

}  // namespace

TEST_CASE("gradients of a two-layer classifier match finite differences") {
  std::mt19937_64 rng(1);
  ad::ParamSet ps;
  ad::Param& W1 = ps.add_glorot("W1", 6, 4, rng);
  ad::Param& b1 = ps.add_normal("b1", 6, 1, rng, 0.5);
  ad::Param& W2 = ps.add_glorot("W2", 5, 6, rng);
  ad::Param& b2 = ps.add_normal("b2", 5, 1, rng, 0.5);
  Mat x = random_mat(4, 1, rng);
  check_gradients(ps, [&](ad::Tape& t) {
    Var h = t.tanh_(t.affine(W1, t.input(x), b1));
    return t.cross_entropy(t.affine(W2, h, b2), 3);
  });
}

TEST_CASE("gradients flow through sigmoid, cmul, sub, scale and average") {
  std::mt19937_64 rng(2);
  ad::ParamSet ps;
  ad::Param& W = ps.add_glorot("W", 4, 4, rng);
  ad::Param& U = ps.add_glorot("U", 4, 4, rng);
  Mat x = random_mat(4, 1, rng);
  check_gradients(ps, [&](ad::Tape& t) {
    Var a = t.sigmoid_(t.matmul(W, t.input(x)));
    Var b = t.tanh_(t.matmul(U, t.input(x)));
    Var c = t.cmul(a, t.sub(b, t.scale(a, 0.3)));
    std::vector<Var> cells;
    for (int k = 0; k < 4; ++k) cells.push_back(t.cross_entropy(t.concat(c, b), k));
    return t.average(cells);
  });
}

TEST_CASE("fused GRU step gradients match finite differences") {
  std::mt19937_64 rng(3);
  ad::ParamSet ps;
  ad::GruParams gru = ad::make_gru(ps, "gru", 3, 5, rng);
  ad::Param& W = ps.add_glorot("out", 4, 5, rng);
  Mat x0 = random_mat(3, 1, rng), x1 = random_mat(3, 1, rng);
  check_gradients(ps, [&](ad::Tape& t) {
    Var h = t.input(Mat::Zero(5, 1));
    h = t.gru(gru, t.input(x0), h);
    h = t.gru(gru, t.input(x1), h);  // parameter reuse across steps
    return t.cross_entropy(t.matmul(W, h), 1);
  });
}

TEST_CASE("attention composition gradients match finite differences") {
  std::mt19937_64 rng(4);
  ad::ParamSet ps;
  ad::Param& E = ps.add_normal("E", 5, 9, rng, 0.4);
  ad::Param& Wp = ps.add_glorot("Wp", 4, 5, rng);
  ad::Param& Wq = ps.add_glorot("Wq", 4, 5, rng);
  ad::Param& bo = ps.add_normal("bo", 9, 1, rng, 0.2);
  check_gradients(ps, [&](ad::Tape& t) {
    std::vector<Var> cols;
    for (int id : {1, 4, 7, 2}) cols.push_back(t.lookup(E, id));
    Var H = t.matmul(Wp, t.hstack(cols));        // 4 x T
    Var q = t.matmul(Wq, t.lookup(E, 8));        // 4 x 1
    Var alpha = t.softmax_col(t.matmul_tn(H, q));
    Var ctx = t.matmul_nn(H, alpha);
    Var pooled = t.mean_cols(t.hstack(cols), 1, 3);
    Var comb = t.tanh_(t.add(ctx, t.rows(pooled, 0, 4)));
    std::vector<Var> probe;
    probe.push_back(t.cross_entropy(t.tied_logits(E, t.concat(comb, t.input(Mat::Zero(1, 1))), bo), 3));
    probe.push_back(t.cross_entropy(t.tied_logits(E, t.concat(comb, t.input(Mat::Ones(1, 1))), bo), 6));
    return t.average(probe);
  });
}

TEST_CASE("bigru tape and forward-only paths agree") {
  std::mt19937_64 rng(5);
  ad::ParamSet ps;
  nn::BiGruStack stack = nn::make_bigru(ps, "enc", 3, 4, 2, rng);
  ad::Param& E = ps.add_normal("E", 3, 7, rng, 0.5);
  std::vector<int> ids = {1, 5, 2, 6, 0};

  Mat plain = nn::bigru_forward(stack, nn::embed_forward(E, ids));
  ad::Tape tape;
  std::vector<Var> cols = nn::bigru_tape(tape, stack, nn::embed_tape(tape, E, ids));
  REQUIRE(cols.size() == ids.size());
  for (size_t i = 0; i < cols.size(); ++i) {
    const Mat& c = tape.val(cols[i]);
    REQUIRE((c - plain.col(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("stacked bigru gradients match finite differences") {
  std::mt19937_64 rng(6);
  ad::ParamSet ps;
  nn::BiGruStack stack = nn::make_bigru(ps, "enc", 2, 3, 2, rng);
  ad::Param& E = ps.add_normal("E", 2, 5, rng, 0.5);
  ad::Param& W = ps.add_glorot("out", 4, 6, rng);
  std::vector<int> ids = {1, 3, 0, 4};
  check_gradients(ps, [&](ad::Tape& t) {
    auto cols = nn::bigru_tape(t, stack, nn::embed_tape(t, E, ids));
    Var pooled = t.mean_cols(t.hstack(cols), 0, static_cast<int>(ids.size()));
    return t.cross_entropy(t.matmul(W, pooled), 2);
  });
}

TEST_CASE("Adam updates are deterministic and checksums track parameter bytes") {
  auto make = [](uint64_t seed) {
    auto ps = std::make_unique<ad::ParamSet>();
    std::mt19937_64 rng(seed);
    ps->add_glorot("W", 4, 4, rng);
    ps->add_normal("b", 4, 1, rng, 0.1);
    return ps;
  };
  auto a = make(11), b = make(11), c = make(12);
  CHECK(a->checksum() == b->checksum());
  CHECK(a->checksum() != c->checksum());

  ad::Adam opt_a(ad::AdamConfig{0.01}), opt_b(ad::AdamConfig{0.01});
  for (int step = 0; step < 3; ++step) {
    for (auto* ps : {a.get(), b.get()}) {
      ps->zero_grad();
      for (auto& p : ps->all()) p.grad.setConstant(0.5);
    }
    opt_a.step(*a);
    opt_b.step(*b);
  }
  CHECK(a->checksum() == b->checksum());
  CHECK(a->all().front().value.allFinite());
}
