#include <algorithm>

#include "doctest.h"
#include "lvsa/error.hpp"
#include "lvsa/oracle.hpp"
#include "support.hpp"

using namespace lvsa;
using testsupport::kg_from;
using testsupport::TempDir;
using testsupport::tsv;
using testsupport::write_file;

namespace {

EntityId ent(const Kg& kg, const char* l) { return *kg.find_entity(l); }
RelationId rel(const Kg& kg, const char* l) { return *kg.find_relation(l); }

AnswerSet unite(const AnswerSet& a, const AnswerSet& b) {
  AnswerSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

TEST_CASE("2p answer by hand") {
  const Kg kg = kg_from(tsv({{"a", "r", "b"}, {"b", "s", "c"}}));
  const EntityId a[] = {ent(kg, "a")};
  const RelationId rs[] = {rel(kg, "r"), rel(kg, "s")};
  const QueryGraph q = instantiate_template(Template::k2p, a, rs);
  CHECK(answer_set(kg, q) == AnswerSet{ent(kg, "c")});
}

TEST_CASE("union answers") {
  const Kg kg = kg_from(tsv({{"a", "r", "b"}, {"x", "r", "y"}}));
  const EntityId ax[] = {ent(kg, "a"), ent(kg, "x")};
  const RelationId rr[] = {rel(kg, "r"), rel(kg, "r")};
  const QueryGraph q = instantiate_template(Template::k2u, ax, rr);
  AnswerSet expect = {ent(kg, "b"), ent(kg, "y")};
  std::sort(expect.begin(), expect.end());
  CHECK(answer_set(kg, q) == expect);
}

TEST_CASE("empty graph has no answers") {
  auto vocab = std::make_shared<Vocabularies>();
  for (const char* e : {"a", "b", "c"}) vocab->entities.add(e);
  vocab->relations.add("r");
  vocab->relations.add("s");
  const SplitGraphs s = compose_splits(vocab, {}, {}, {});
  for (Template t : kAllTemplates) {
    const auto [na, nr] = template_arity(t);
    std::vector<EntityId> anchors(na, 0);
    std::vector<RelationId> rels(nr, 0);
    for (std::size_t i = 0; i < na; ++i) anchors[i] = static_cast<EntityId>(i % 3);
    const QueryGraph q = instantiate_template(t, anchors, rels);
    CAPTURE(template_name(t));
    CHECK(answer_set(s.full, q).empty());
  }
}

TEST_CASE("negation removes neighbours") {
  const Kg kg = kg_from(tsv({{"a", "r", "x"}, {"a", "r", "y"}, {"b", "s", "y"}}));
  const EntityId ab[] = {ent(kg, "a"), ent(kg, "b")};
  const RelationId rs[] = {rel(kg, "r"), rel(kg, "s")};
  const QueryGraph q = instantiate_template(Template::k2in, ab, rs);
  CHECK(answer_set(kg, q) == AnswerSet{ent(kg, "x")});
}

TEST_CASE("easy and hard labels") {
  TempDir dir("labels");
  write_file(dir / "train.tsv", tsv({{"a", "r", "b"}, {"b", "s", "c"}}));
  write_file(dir / "valid.tsv", "");
  write_file(dir / "test.tsv", tsv({{"b", "s", "d"}}));
  const SplitGraphs sp = compose_splits(dir / "train.tsv", dir / "valid.tsv", dir / "test.tsv");
  const Kg& kg = sp.full;
  const EntityId a[] = {ent(kg, "a")};
  const RelationId rs[] = {rel(kg, "r"), rel(kg, "s")};
  const LabeledAnswers la = label_answers(sp, instantiate_template(Template::k2p, a, rs));
  CHECK(la.easy == AnswerSet{ent(kg, "c")});
  CHECK(la.hard == AnswerSet{ent(kg, "d")});

  const RelationId r[] = {rel(kg, "r")};
  const LabeledAnswers one = label_answers(sp, instantiate_template(Template::k1p, a, r));
  CHECK(one.hard.empty());
  CHECK(one.easy == AnswerSet{ent(kg, "b")});
}

TEST_CASE("sampling is seeded and respects the mode") {
  const SplitGraphs sp = testsupport::random_graph(40, 3, 200, 11);
  // hold out a slice as test edges so full mode has hard answers
  const auto fwd = sp.full.forward_triples();
  const std::span<const Triple> all(fwd);
  const SplitGraphs split = compose_splits(sp.full.shared_vocab(), all.subspan(0, 160), {},
                                           all.subspan(160));
  for (Template t : {Template::k2p, Template::k2in, Template::kUp}) {
    CAPTURE(template_name(t));
    const auto a = sample_queries(split, t, 10, 7, SampleMode::Full);
    const auto b = sample_queries(split, t, 10, 7, SampleMode::Full);
    CHECK(a == b);
    REQUIRE(a.size() == 10);
    for (const QueryGraph& q : a) {
      CHECK(q.tag == t);
      REQUIRE(q.hard.has_value());
      CHECK_FALSE(q.hard->empty());
      REQUIRE(q.easy.has_value());
      AnswerSet both;
      std::set_intersection(q.easy->begin(), q.easy->end(), q.hard->begin(), q.hard->end(),
                            std::back_inserter(both));
      CHECK(both.empty());
      const LabeledAnswers la = label_answers(split, q);
      CHECK(la.easy == *q.easy);
      CHECK(la.hard == *q.hard);
    }
  }
  for (const QueryGraph& q : sample_queries(split, Template::k2in, 20, 3, SampleMode::Full)) {
    const QueryEdge& neg = q.disjuncts[0].edges[1];
    REQUIRE(neg.negated);
    const EntityId anchor = q.disjuncts[0].nodes[neg.src].entity;
    const auto banned = split.full.neighbors(anchor, neg.rel);
    for (EntityId h : *q.hard) {
      CHECK(std::find(banned.begin(), banned.end(), h) == banned.end());
    }
  }
  for (const QueryGraph& q : sample_queries(split, Template::k3p, 10, 1, SampleMode::Partial)) {
    CHECK_FALSE(q.easy->empty());
  }
  CHECK(sample_queries(split, Template::k2p, 10, 7, SampleMode::Full) !=
        sample_queries(split, Template::k2p, 10, 8, SampleMode::Full));
}

TEST_CASE("sparse graphs exhaust the retry budget") {
  auto vocab = std::make_shared<Vocabularies>();
  vocab->entities.add("a");
  vocab->entities.add("b");
  vocab->relations.add("r");
  const Triple t[] = {{0, 0, 1}};
  const SplitGraphs sp = compose_splits(vocab, t, {}, {});
  // every edge is a training edge, so no hard answers exist
  CHECK_THROWS_AS(sample_queries(sp, Template::k1p, 1, 0, SampleMode::Full), SamplingError);
}

TEST_CASE("pruned enumeration equals naive enumeration") {
  const SplitGraphs sp = testsupport::random_graph(12, 2, 40, 3);
  const SplitGraphs single = single_split(sp.full);
  for (Template t : kAllTemplates) {
    CAPTURE(template_name(t));
    const auto qs = sample_queries(single, t, 15, 21, SampleMode::Partial);
    for (const QueryGraph& q : qs) {
      const AnswerSet fast = answer_set(sp.full, q);
      CHECK(fast == naive_answer_set(sp.full, sp.full, q));
      AnswerSet u;
      for (const auto& g : q.disjuncts) u = unite(u, conjunct_answer_set(sp.full, sp.full, g));
      CHECK(fast == u);
    }
  }
}

TEST_CASE("node groundings of a chain") {
  const Kg kg = kg_from(tsv({{"a", "r", "b"}, {"a", "r", "z"}, {"b", "s", "c"}}));
  const EntityId a[] = {ent(kg, "a")};
  const RelationId rs[] = {rel(kg, "r"), rel(kg, "s")};
  const QueryGraph q = instantiate_template(Template::k2p, a, rs);
  // z has no s-edge, so only b extends to an answer
  CHECK(node_groundings(kg, kg, q.disjuncts[0], 1) == AnswerSet{ent(kg, "b")});
  CHECK(node_groundings(kg, kg, q.disjuncts[0], 2) == AnswerSet{ent(kg, "c")});
}

TEST_CASE("latency probe") {
  const SplitGraphs sp = testsupport::random_graph(60, 2, 240, 4);
  CHECK(latency_probe(sp.full, Template::k1p, 5) > 0.0);
  CHECK(latency_probe(sp.full, Template::k3p, 5) > 0.0);
}

TEST_CASE("first witness satisfies every literal") {
  const auto kg = testsupport::random_graph(25, 3, 90, 4);
  for (Template t : kAllTemplates) {
    CAPTURE(template_name(t));
    const auto qs = sample_queries(kg, t, 10, 2, SampleMode::Partial);
    for (const QueryGraph& q : qs) {
      for (const ConjunctiveGraph& g : q.disjuncts) {
        const auto w = first_witness(kg.full, kg.full, g);
        if (!w) {
          CHECK(conjunct_answer_set(kg.full, kg.full, g).empty());
          continue;
        }
        for (const QueryEdge& e : g.edges) {
          CHECK(kg.full.contains((*w)[e.src], e.rel, (*w)[e.dst]) != e.negated);
        }
        const AnswerSet ans = conjunct_answer_set(kg.full, kg.full, g);
        CHECK(std::binary_search(ans.begin(), ans.end(), (*w)[g.free_node()]));
      }
    }
  }
}
