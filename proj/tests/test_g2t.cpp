#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "graphtext/g2t.hpp"

using namespace graphtext;
using ad::Mat;

namespace {

TokenVocab test_vocab() {
  return TokenVocab({"1981", "ada", "and", "bo", "born", "cy", "forest", "genre", "hip", "hop",
                     "in", "is", "likes", "of", "the", "was", "year"});
}

Entity ent(std::vector<std::string> tokens) {
  Entity e;
  e.tokens = std::move(tokens);
  e.id = join_tokens(e.tokens, '_');
  return e;
}

KnowledgeGraph graph_of(std::vector<Triple> triples) {
  KnowledgeGraph g;
  g.triples = std::move(triples);
  std::set<std::string> seen;
  for (const auto& t : g.triples)
    for (const Entity* e : {&t.head, &t.tail})
      if (seen.insert(e->id).second) g.entities.push_back(*e);
  return g;
}

AnnotatedText text_of(std::vector<std::string> tokens) {
  AnnotatedText t;
  t.tokens = std::move(tokens);
  return t;
}

KnowledgeGraph two_triple_graph() {
  Entity ada = ent({"ada"});
  return graph_of({Triple{ada, Relation{"genre"}, ent({"hip", "hop"})},
                   Triple{ada, Relation{"likes"}, ent({"bo"})}});
}

G2TConfig small_cfg() { return G2TConfig{8, 6, 1}; }

ad::Param& param_named(ad::ParamSet& ps, const std::string& name) {
  for (auto& p : ps.all())
    if (p.name == name) return p;
  throw std::logic_error("no parameter " + name);
}

}  // namespace

TEST_CASE("g2t loss anchors: uniform decoder gives ln V, empty inputs are rejected") {
  TokenVocab v = test_vocab();
  G2TModel model(v.size(), small_cfg(), 31);
  KnowledgeGraph g = two_triple_graph();
  AnnotatedText t = text_of({"ada", "likes", "bo"});

  param_named(model.params(), "g2t.embed").value.setZero();
  param_named(model.params(), "g2t.out.b").value.setZero();
  CHECK(model.loss(g, t, v) == Catch::Approx(std::log(double(v.size()))).epsilon(1e-12));

  try {
    model.loss(KnowledgeGraph{}, t, v);
    FAIL("expected EMPTY_GRAPH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EMPTY_GRAPH);
  }
  try {
    model.loss(g, AnnotatedText{}, v);
    FAIL("expected EMPTY_TEXT");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EMPTY_TEXT);
  }
}

TEST_CASE("tape and forward-only g2t losses agree") {
  TokenVocab v = test_vocab();
  G2TModel model(v.size(), small_cfg(), 32);
  KnowledgeGraph g = two_triple_graph();
  AnnotatedText t = text_of({"ada", "was", "born", "in", "1981"});
  model.params().zero_grad();
  CHECK(model.loss_backward(g, t, v, 1.0) == Catch::Approx(model.loss(g, t, v)).epsilon(1e-12));
}

TEST_CASE("g2t gradients match central finite differences on a 2-triple/6-token example") {
  TokenVocab v = test_vocab();
  G2TModel model(v.size(), G2TConfig{5, 4, 1}, 33);
  KnowledgeGraph g = two_triple_graph();
  AnnotatedText t = text_of({"ada", "likes", "bo", "and", "hip", "hop"});

  model.params().zero_grad();
  model.loss_backward(g, t, v, 1.0);
  const double step = 1e-4;
  for (auto& p : model.params().all()) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double orig = p.value.data()[i];
      p.value.data()[i] = orig + step;
      const double up = model.loss(g, t, v);
      p.value.data()[i] = orig - step;
      const double down = model.loss(g, t, v);
      p.value.data()[i] = orig;
      const double fd = (up - down) / (2.0 * step);
      const double got = p.grad.data()[i];
      const double rel = std::abs(fd - got) / std::max({std::abs(fd), std::abs(got), 1e-8});
      INFO(p.name << "[" << i << "] fd=" << fd << " ad=" << got);
      REQUIRE(rel < 1e-3);
    }
  }
}

TEST_CASE("greedy generation respects the decode contract") {
  TokenVocab v = test_vocab();
  G2TModel model(v.size(), small_cfg(), 34);
  KnowledgeGraph g = two_triple_graph();

  AnnotatedText once = model.generate(g, v, DecodeConfig{64});
  AnnotatedText twice = model.generate(g, v, DecodeConfig{64});
  CHECK(once == twice);
  CHECK(once.tokens.size() <= 64);

  AnnotatedText clipped = model.generate(g, v, DecodeConfig{1});
  CHECK(clipped.tokens.size() <= 1);

  for (const auto& tok : once.tokens) {
    CHECK(tok != "<PAD>");
    CHECK(tok != "<BOS>");
    CHECK(tok != "<EOS>");
  }
}

TEST_CASE("entity spans are recovered by first contiguous surface match") {
  std::vector<Entity> entities = {ent({"new", "york"}), ent({"york"}), ent({"ada"})};
  std::vector<std::string> tokens = {"york", "meets", "new", "york", "and", "ada", "today"};
  auto spans = G2TModel::match_entity_spans(tokens, entities);
  REQUIRE(spans.size() == 3);
  CHECK(spans[0] == EntitySpan{"new_york", 2, 4});
  CHECK(spans[1] == EntitySpan{"york", 0, 1});  // first free occurrence
  CHECK(spans[2] == EntitySpan{"ada", 5, 6});

  // Missing entities get no span.
  auto missing = G2TModel::match_entity_spans({"nothing", "here"}, entities);
  CHECK(missing.empty());
}

TEST_CASE("g2t training overfits one pair and honors rates and seeds") {
  TokenVocab v = test_vocab();
  KnowledgeGraph g = two_triple_graph();
  AnnotatedText t = text_of({"the", "genre", "of", "ada", "is", "hip", "hop"});
  std::vector<std::pair<KnowledgeGraph, AnnotatedText>> batch = {{g, t}};

  SECTION("monotone trend: at most 2 non-monotone steps in a 20-step window") {
    G2TModel model(v.size(), small_cfg(), 35);
    ad::Adam opt(ad::AdamConfig{3e-3});
    int violations = 0;
    double prev = 1e300;
    for (int s = 0; s < 20; ++s) {
      const double gold_loss = model.loss(g, t, v);
      if (gold_loss > prev) ++violations;
      prev = gold_loss;
      g2t_train_step(model, batch, opt, v);
    }
    CHECK(violations <= 2);
  }

  SECTION("an overfitted decoder reproduces the training text exactly") {
    G2TModel model(v.size(), G2TConfig{16, 12, 1}, 36);
    ad::Adam opt(ad::AdamConfig{5e-3});
    for (int s = 0; s < 400; ++s) g2t_train_step(model, batch, opt, v);
    CHECK(model.loss(g, t, v) < 0.05);
    CHECK(model.generate(g, v, DecodeConfig{64}).tokens == t.tokens);
  }

  SECTION("zero learning rate leaves parameters unchanged") {
    G2TModel model(v.size(), small_cfg(), 37);
    ad::Adam opt(ad::AdamConfig{0.0});
    const uint64_t before = model.checksum();
    g2t_train_step(model, batch, opt, v);
    CHECK(model.checksum() == before);
  }

  SECTION("fixed seed reproduces the loss trajectory exactly") {
    std::vector<double> runs[2];
    for (int r = 0; r < 2; ++r) {
      G2TModel model(v.size(), small_cfg(), 38);
      ad::Adam opt(ad::AdamConfig{1e-3});
      for (int s = 0; s < 10; ++s) runs[r].push_back(g2t_train_step(model, batch, opt, v));
    }
    CHECK(runs[0] == runs[1]);
  }
}

TEST_CASE("overfitting attaches the source graph's entity spans to the output") {
  TokenVocab v = test_vocab();
  Entity ada = ent({"ada"});
  Entity hiphop = ent({"hip", "hop"});
  KnowledgeGraph g = graph_of({Triple{ada, Relation{"genre"}, hiphop}});
  AnnotatedText t = text_of({"the", "genre", "of", "ada", "is", "hip", "hop"});

  G2TModel model(v.size(), G2TConfig{16, 12, 1}, 39);
  ad::Adam opt(ad::AdamConfig{5e-3});
  std::vector<std::pair<KnowledgeGraph, AnnotatedText>> batch = {{g, t}};
  for (int s = 0; s < 400; ++s) g2t_train_step(model, batch, opt, v);

  AnnotatedText out = model.generate(g, v, DecodeConfig{64});
  REQUIRE(out.tokens == t.tokens);
  REQUIRE(out.entity_spans.size() == 2);
  CHECK(out.entity_spans[0] == EntitySpan{"ada", 3, 4});
  CHECK(out.entity_spans[1] == EntitySpan{"hip_hop", 5, 7});
}
