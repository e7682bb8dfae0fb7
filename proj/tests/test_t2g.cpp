#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>

#include "graphtext/t2g.hpp"

using namespace graphtext;
using ad::Mat;

namespace {

TokenVocab test_vocab() {
  return TokenVocab({"ada", "bo", "cy", "dee", "knows", "likes", "met", "owns", "said", "today",
                     "the", "and"});
}

RelationVocab test_relations() { return RelationVocab({"likes", "knows", "owns"}); }

AnnotatedText text_of(std::vector<std::string> tokens, std::vector<EntitySpan> spans) {
  AnnotatedText t;
  t.tokens = std::move(tokens);
  t.entity_spans = std::move(spans);
  return t;
}

Entity ent(std::vector<std::string> tokens) {
  Entity e;
  e.tokens = std::move(tokens);
  e.id = join_tokens(e.tokens, '_');
  return e;
}

KnowledgeGraph graph_of(std::vector<Triple> triples, std::vector<Entity> extra = {}) {
  KnowledgeGraph g;
  g.triples = std::move(triples);
  std::set<std::string> seen;
  for (const auto& t : g.triples)
    for (const Entity* e : {&t.head, &t.tail})
      if (seen.insert(e->id).second) g.entities.push_back(*e);
  for (auto& e : extra)
    if (seen.insert(e.id).second) g.entities.push_back(std::move(e));
  return g;
}

// "ada likes bo and cy" with all three names annotated.
AnnotatedText three_entity_text() {
  return text_of({"ada", "likes", "bo", "and", "cy"},
                 {EntitySpan{"ada", 0, 1}, EntitySpan{"bo", 2, 3}, EntitySpan{"cy", 4, 5}});
}

KnowledgeGraph three_entity_graph() {
  return graph_of({Triple{ent({"ada"}), Relation{"likes"}, ent({"bo"})},
                   Triple{ent({"cy"}), Relation{"knows"}, ent({"ada"})}});
}

T2GConfig small_cfg() { return T2GConfig{8, 6, 1, 10}; }

ad::Param& param_named(ad::ParamSet& ps, const std::string& name) {
  for (auto& p : ps.all())
    if (p.name == name) return p;
  throw std::logic_error("no parameter " + name);
}

}  // namespace

TEST_CASE("encode_tokens yields one context vector per token") {
  TokenVocab v = test_vocab();
  T2GModel model(v.size(), test_relations().size(), small_cfg(), 42);
  Mat one = model.encode_tokens(v.ids({"ada"}));
  CHECK(one.cols() == 1);
  CHECK(one.rows() == 2 * small_cfg().hidden);

  Mat ctx_a = model.encode_tokens(v.ids({"ada", "likes", "bo"}));
  Mat ctx_b = model.encode_tokens(v.ids({"ada", "owns", "bo"}));
  // Changing the middle token changes its own vector (and may change others).
  CHECK((ctx_a.col(1) - ctx_b.col(1)).cwiseAbs().maxCoeff() > 0.0);
  CHECK(ctx_a.cols() == 3);

  try {
    model.encode_tokens({});
    FAIL("expected EMPTY_TEXT");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EMPTY_TEXT);
  }
}

TEST_CASE("encode_tokens is bitwise deterministic for a fixed seed") {
  TokenVocab v = test_vocab();
  T2GModel a(v.size(), 4, small_cfg(), 7);
  T2GModel b(v.size(), 4, small_cfg(), 7);
  Mat ca = a.encode_tokens(v.ids({"ada", "likes", "bo", "today"}));
  Mat cb = b.encode_tokens(v.ids({"ada", "likes", "bo", "today"}));
  REQUIRE((ca - cb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pool_entity is the arithmetic mean of the span columns") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d(0.0, 1.0);
  Mat ctx(5, 7);
  for (int j = 0; j < 7; ++j)
    for (int i = 0; i < 5; ++i) ctx(i, j) = d(rng);

  // Length-one span equals the column itself.
  CHECK((T2GModel::pool_entity(ctx, EntitySpan{"e", 2, 3}) - ctx.col(2)).cwiseAbs().maxCoeff() ==
        0.0);

  // Independent elementwise mean.
  Mat expect = Mat::Zero(5, 1);
  for (int j = 1; j < 5; ++j) expect += ctx.col(j);
  expect /= 4.0;
  CHECK((T2GModel::pool_entity(ctx, EntitySpan{"e", 1, 5}) - expect).cwiseAbs().maxCoeff() < 1e-12);

  // Two identical columns pool to that column.
  Mat dup(5, 2);
  dup.col(0) = ctx.col(0);
  dup.col(1) = ctx.col(0);
  CHECK((T2GModel::pool_entity(dup, EntitySpan{"e", 0, 2}) - ctx.col(0)).cwiseAbs().maxCoeff() <
        1e-12);

  try {
    T2GModel::pool_entity(ctx, EntitySpan{"e", 3, 3});
    FAIL("expected EMPTY_SPAN");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EMPTY_SPAN);
  }
}

TEST_CASE("classify_edges is pairwise, deterministic and permutation-equivariant") {
  RelationVocab rels = test_relations();
  T2GModel model(test_vocab().size(), rels.size(), small_cfg(), 9);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<Mat> vecs;
  for (int k = 0; k < 4; ++k) {
    Mat v(2 * small_cfg().hidden, 1);
    for (int i = 0; i < v.size(); ++i) v.data()[i] = d(rng);
    vecs.push_back(v);
  }
  Mat s1 = model.classify_edges(vecs);
  Mat s2 = model.classify_edges(vecs);
  REQUIRE((s1 - s2).cwiseAbs().maxCoeff() == 0.0);  // determinism

  std::vector<size_t> perm = {2, 0, 3, 1};
  std::vector<Mat> pvecs;
  for (size_t p : perm) pvecs.push_back(vecs[p]);
  Mat sp = model.classify_edges(pvecs);
  const int k = 4;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      REQUIRE((sp.col(i * k + j) -
               s1.col(static_cast<int>(perm[static_cast<size_t>(i)]) * k +
                      static_cast<int>(perm[static_cast<size_t>(j)])))
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
}

TEST_CASE("edge NLL hits the uniform and one-hot anchors") {
  const int R = 4, K = 3;
  std::vector<int> labels(K * K, 0);
  labels[0 * K + 1] = 2;
  Mat uniform = Mat::Zero(R, K * K);
  CHECK(edge_nll_forward(uniform, labels, K) == Catch::Approx(std::log(double(R))).epsilon(1e-12));

  Mat onehot = Mat::Zero(R, K * K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) onehot(labels[static_cast<size_t>(i * K + j)], i * K + j) = 50.0;
  CHECK(edge_nll_forward(onehot, labels, K) < 1e-9);

  // With an empty gold graph the all-NO_RELATION prediction minimizes loss.
  std::vector<int> empty_gold(K * K, 0);
  Mat predict_none = Mat::Zero(R, K * K);
  for (int c = 0; c < K * K; ++c) predict_none(0, c) = 50.0;
  Mat predict_some = predict_none;
  predict_some(0, 1) = 0.0;
  predict_some(2, 1) = 50.0;
  CHECK(edge_nll_forward(predict_none, empty_gold, K) <
        edge_nll_forward(predict_some, empty_gold, K));
}

TEST_CASE("t2g loss matches a brute-force NLL oracle and the uniform anchor") {
  TokenVocab v = test_vocab();
  RelationVocab rels = test_relations();
  T2GModel model(v.size(), rels.size(), small_cfg(), 11);
  AnnotatedText t = three_entity_text();
  KnowledgeGraph g = three_entity_graph();

  // Oracle: recompute the mean off-diagonal -log softmax from the score
  // slab and a hand-built gold assignment.
  Mat scores = model.classify_edges(model.entity_vectors(t, v));
  const int K = 3;
  std::vector<int> gold(K * K, 0);
  gold[0 * K + 1] = rels.index_of("likes").value();  // ada -> bo
  gold[2 * K + 0] = rels.index_of("knows").value();  // cy -> ada
  double expect = 0.0;
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      if (i == j) continue;
      double denom = 0.0;
      for (int r = 0; r < rels.size(); ++r) denom += std::exp(scores(r, i * K + j));
      expect += -std::log(std::exp(scores(gold[static_cast<size_t>(i * K + j)], i * K + j)) / denom);
    }
  }
  expect /= K * K - K;
  CHECK(model.loss(t, g, v, rels) == Catch::Approx(expect).margin(1e-9));

  // Zeroing the output layer forces uniform scores -> ln R.
  param_named(model.params(), "t2g.cls.W2").value.setZero();
  param_named(model.params(), "t2g.cls.b2").value.setZero();
  CHECK(model.loss(t, g, v, rels) ==
        Catch::Approx(std::log(double(rels.size()))).epsilon(1e-12));
}

TEST_CASE("t2g loss demands graph entities annotated in the text") {
  TokenVocab v = test_vocab();
  RelationVocab rels = test_relations();
  T2GModel model(v.size(), rels.size(), small_cfg(), 12);
  AnnotatedText t = text_of({"ada", "likes", "bo"}, {EntitySpan{"ada", 0, 1}});
  KnowledgeGraph g = graph_of({Triple{ent({"ada"}), Relation{"likes"}, ent({"bo"})}});
  try {
    model.loss(t, g, v, rels);
    FAIL("expected ENTITY_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ENTITY_MISMATCH);
  }
}

TEST_CASE("t2g loss is invariant under entity id renaming") {
  TokenVocab v = test_vocab();
  RelationVocab rels = test_relations();
  T2GModel model(v.size(), rels.size(), small_cfg(), 13);
  AnnotatedText t = three_entity_text();
  KnowledgeGraph g = three_entity_graph();
  const double base = model.loss(t, g, v, rels);

  auto rename = [](const std::string& id) { return "node-" + id; };
  AnnotatedText t2 = t;
  for (auto& s : t2.entity_spans) s.entity_id = rename(s.entity_id);
  KnowledgeGraph g2 = g;
  for (auto& e : g2.entities) e.id = rename(e.id);
  for (auto& tr : g2.triples) {
    tr.head.id = rename(tr.head.id);
    tr.tail.id = rename(tr.tail.id);
  }
  CHECK(model.loss(t2, g2, v, rels) == Catch::Approx(base).epsilon(1e-15));
}

TEST_CASE("tape and forward-only t2g losses agree") {
  TokenVocab v = test_vocab();
  RelationVocab rels = test_relations();
  T2GModel model(v.size(), rels.size(), small_cfg(), 14);
  AnnotatedText t = three_entity_text();
  KnowledgeGraph g = three_entity_graph();
  model.params().zero_grad();
  CHECK(model.loss_backward(t, g, v, rels, 1.0) ==
        Catch::Approx(model.loss(t, g, v, rels)).epsilon(1e-12));
}

TEST_CASE("t2g gradients match central finite differences on a 3-entity example") {
  TokenVocab v = test_vocab();
  RelationVocab rels = test_relations();
  T2GModel model(v.size(), rels.size(), T2GConfig{6, 4, 1, 8}, 15);
  AnnotatedText t = three_entity_text();
  KnowledgeGraph g = three_entity_graph();

  model.params().zero_grad();
  model.loss_backward(t, g, v, rels, 1.0);
  const double step = 1e-4;
  for (auto& p : model.params().all()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + step;
      const double up = model.loss(t, g, v, rels);
      p.value.data()[i] = orig - step;
      const double down = model.loss(t, g, v, rels);
      p.value.data()[i] = orig;
      const double fd = (up - down) / (2.0 * step);
      const double got = p.grad.data()[i];
      const double rel = std::abs(fd - got) / std::max({std::abs(fd), std::abs(got), 1e-8});
      INFO(p.name << "[" << i << "] fd=" << fd << " ad=" << got);
      REQUIRE(rel < 1e-3);
    }
  }
}

TEST_CASE("t2g_predict anchors nodes to the text entities with argmax labels") {
  TokenVocab v = test_vocab();
  RelationVocab rels = test_relations();
  T2GModel model(v.size(), rels.size(), small_cfg(), 16);

  // Zero entities: empty graph, no error.
  KnowledgeGraph none = model.predict(text_of({"the", "today"}, {}), v, rels);
  CHECK(none.entities.empty());
  CHECK(none.triples.empty());

  // One entity: node kept, no pairs.
  KnowledgeGraph one =
      model.predict(text_of({"ada", "said"}, {EntitySpan{"ada", 0, 1}}), v, rels);
  CHECK(one.entities.size() == 1);
  CHECK(one.triples.empty());

  AnnotatedText t = three_entity_text();
  KnowledgeGraph pred = model.predict(t, v, rels);
  std::vector<std::string> node_ids;
  for (const auto& e : pred.entities) node_ids.push_back(e.id);
  CHECK(node_ids == entity_key_order(t));

  // Exhaustive argmax oracle with the lowest-index tie rule.
  Mat scores = model.classify_edges(model.entity_vectors(t, v));
  std::vector<std::tuple<int, int, int>> expect;
  const int k = 3;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      int best = 0;
      for (int r = 1; r < rels.size(); ++r)
        if (scores(r, i * k + j) > scores(best, i * k + j)) best = r;
      if (best != 0) expect.emplace_back(i, j, best);
    }
  }
  REQUIRE(pred.triples.size() == expect.size());
  for (size_t n = 0; n < expect.size(); ++n) {
    auto [i, j, r] = expect[n];
    CHECK(pred.triples[n].head.id == node_ids[static_cast<size_t>(i)]);
    CHECK(pred.triples[n].tail.id == node_ids[static_cast<size_t>(j)]);
    CHECK(pred.triples[n].relation.label == rels.label(r));
  }
}

TEST_CASE("t2g training overfits one pair and honors rates and seeds") {
  TokenVocab v = test_vocab();
  RelationVocab rels = test_relations();
  AnnotatedText t = three_entity_text();
  KnowledgeGraph g = three_entity_graph();
  std::vector<std::pair<AnnotatedText, KnowledgeGraph>> batch = {{t, g}};

  SECTION("loss strictly decreases over the first 20 steps") {
    T2GModel model(v.size(), rels.size(), small_cfg(), 21);
    ad::Adam opt(ad::AdamConfig{3e-3});
    double prev = 1e300;
    for (int s = 0; s < 20; ++s) {
      const double loss = t2g_train_step(model, batch, opt, v, rels);
      REQUIRE(loss < prev);
      prev = loss;
    }
  }

  SECTION("zero learning rate leaves parameters unchanged") {
    T2GModel model(v.size(), rels.size(), small_cfg(), 22);
    ad::Adam opt(ad::AdamConfig{0.0});
    const uint64_t before = model.checksum();
    t2g_train_step(model, batch, opt, v, rels);
    CHECK(model.checksum() == before);
  }

  SECTION("fixed seed reproduces the loss trajectory exactly") {
    std::vector<double> runs[2];
    for (int r = 0; r < 2; ++r) {
      T2GModel model(v.size(), rels.size(), small_cfg(), 23);
      ad::Adam opt(ad::AdamConfig{1e-3});
      for (int s = 0; s < 10; ++s) runs[r].push_back(t2g_train_step(model, batch, opt, v, rels));
    }
    CHECK(runs[0] == runs[1]);
  }
}
