#include "lvsa/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <optional>

#include "lvsa/error.hpp"
#include "lvsa/random.hpp"

namespace lvsa {

namespace {

// Backtracking enumeration of one conjunct. Positive literals into a node
// come from already-assigned nodes, so they prune its candidate list.
class Grounder {
 public:
  Grounder(const Kg& pos, const Kg& neg, const ConjunctiveGraph& g)
      : pos_(pos),
        neg_(neg),
        ann_(skolem_classify(g, pos.num_forward_relations())),
        order_(toposort(ann_).order),
        free_(g.free_node()),
        value_(g.nodes.size(), 0),
        hit_(pos.num_entities(), 0) {}

  AnswerSet run() {
    if (pos_.num_entities() > 0) descend(0);
    return collect();
  }

  std::optional<std::vector<EntityId>> first_witness() {
    stop_first_ = true;
    if (pos_.num_entities() > 0) descend(0);
    if (!done_) return std::nullopt;
    return value_;
  }

 private:
  AnswerSet collect() const {
    AnswerSet out;
    for (EntityId e = 0; e < hit_.size(); ++e) {
      if (hit_[e]) out.push_back(e);
    }
    return out;
  }

  bool passes(const NodeAnnotation& ann, EntityId cand) const {
    for (const InLiteral& lit : ann.forward) {
      const bool holds = (lit.negated ? neg_ : pos_).contains(value_[lit.src], lit.rel, cand);
      if (holds == lit.negated) return false;
    }
    return true;
  }

  void descend(std::size_t pos) {
    if (pos == order_.size()) {
      hit_[value_[free_]] = 1;
      done_ = stop_first_;
      return;
    }
    const NodeIndex node = order_[pos];
    const QueryNode& qn = ann_.graph.nodes[node];
    if (qn.kind == NodeKind::Anchor) {
      value_[node] = qn.entity;
      descend(pos + 1);
      return;
    }
    const NodeAnnotation& ann = ann_.nodes[node];
    const InLiteral* seed = nullptr;
    std::size_t best = SIZE_MAX;
    for (const InLiteral& lit : ann.forward) {
      if (lit.negated) continue;
      const auto size = pos_.neighbors(value_[lit.src], lit.rel).size();
      if (size < best) {
        best = size;
        seed = &lit;
      }
    }
    if (seed != nullptr) {
      for (EntityId c : pos_.neighbors(value_[seed->src], seed->rel)) {
        if (!passes(ann, c)) continue;
        value_[node] = c;
        descend(pos + 1);
        if (done_) return;
      }
    } else {
      const auto n = static_cast<EntityId>(pos_.num_entities());
      for (EntityId c = 0; c < n; ++c) {
        if (!passes(ann, c)) continue;
        value_[node] = c;
        descend(pos + 1);
        if (done_) return;
      }
    }
  }

  const Kg& pos_;
  const Kg& neg_;
  AnnotatedGraph ann_;
  std::vector<NodeIndex> order_;
  NodeIndex free_;
  std::vector<EntityId> value_;
  std::vector<char> hit_;
  bool stop_first_ = false;
  bool done_ = false;
};

AnswerSet merge(const AnswerSet& a, const AnswerSet& b) {
  AnswerSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

AnswerSet conjunct_answer_set(const Kg& positive_kg, const Kg& negation_kg,
                              const ConjunctiveGraph& g) {
  return Grounder(positive_kg, negation_kg, g).run();
}

std::optional<std::vector<EntityId>> first_witness(const Kg& positive_kg, const Kg& negation_kg,
                                                   const ConjunctiveGraph& g) {
  return Grounder(positive_kg, negation_kg, g).first_witness();
}

AnswerSet answer_set(const Kg& positive_kg, const Kg& negation_kg, const QueryGraph& q) {
  AnswerSet out;
  for (const ConjunctiveGraph& g : q.disjuncts) {
    out = merge(out, conjunct_answer_set(positive_kg, negation_kg, g));
  }
  return out;
}

AnswerSet answer_set(const Kg& kg, const QueryGraph& q) { return answer_set(kg, kg, q); }

AnswerSet naive_answer_set(const Kg& positive_kg, const Kg& negation_kg, const QueryGraph& q) {
  const auto num_entities = static_cast<EntityId>(positive_kg.num_entities());
  std::vector<char> hit(num_entities, 0);
  for (const ConjunctiveGraph& g : q.disjuncts) {
    if (num_entities == 0) break;
    std::vector<NodeIndex> slots;
    std::vector<EntityId> value(g.nodes.size(), 0);
    for (NodeIndex i = 0; i < g.nodes.size(); ++i) {
      if (g.nodes[i].kind == NodeKind::Anchor) {
        value[i] = g.nodes[i].entity;
      } else {
        slots.push_back(i);
      }
    }
    const NodeIndex free = g.free_node();
    // Odometer over |V|^slots assignments.
    while (true) {
      bool ok = true;
      for (const QueryEdge& e : g.edges) {
        const bool holds =
            (e.negated ? negation_kg : positive_kg).contains(value[e.src], e.rel, value[e.dst]);
        if (holds == e.negated) {
          ok = false;
          break;
        }
      }
      if (ok) hit[value[free]] = 1;
      std::size_t k = 0;
      for (; k < slots.size(); ++k) {
        if (++value[slots[k]] < num_entities) break;
        value[slots[k]] = 0;
      }
      if (k == slots.size()) break;
    }
  }
  AnswerSet out;
  for (EntityId e = 0; e < num_entities; ++e) {
    if (hit[e]) out.push_back(e);
  }
  return out;
}

AnswerSet node_groundings(const Kg& positive_kg, const Kg& negation_kg,
                          const ConjunctiveGraph& g, NodeIndex node) {
  if (node >= g.nodes.size() || g.nodes[node].kind == NodeKind::Anchor) {
    throw StructureError("node_groundings: node must be a variable");
  }
  ConjunctiveGraph retargeted = g;
  const NodeIndex free = g.free_node();
  if (node != free) {
    VarId spare = 0;
    for (const QueryNode& n : g.nodes) {
      if (n.kind == NodeKind::Existential) spare = std::max(spare, n.var + 1);
    }
    retargeted.nodes[free] = QueryNode::existential(spare);
    retargeted.nodes[node] = QueryNode::free();
  }
  return conjunct_answer_set(positive_kg, negation_kg, retargeted);
}

LabeledAnswers label_answers(const SplitGraphs& splits, const QueryGraph& q) {
  LabeledAnswers out;
  out.easy = answer_set(splits.train_valid, splits.full, q);
  const AnswerSet all = answer_set(splits.full, splits.full, q);
  std::set_difference(all.begin(), all.end(), out.easy.begin(), out.easy.end(),
                      std::back_inserter(out.hard));
  return out;
}

SplitGraphs single_split(const Kg& kg) { return {kg, kg, kg}; }

namespace {

// Grounds a template backwards from a target answer. Anchor and relation
// slots are recovered from a placeholder instantiation whose anchor ids and
// relation ids are the slot numbers themselves.
std::optional<QueryGraph> sample_once(const Kg& kg, Template tag, Rng& rng,
                                      const std::vector<EntityId>& active) {
  const auto [num_anchors, num_rels] = template_arity(tag);
  std::vector<EntityId> anchor_slots(num_anchors);
  std::vector<RelationId> rel_slots(num_rels);
  for (std::size_t i = 0; i < num_anchors; ++i) anchor_slots[i] = static_cast<EntityId>(i);
  for (std::size_t i = 0; i < num_rels; ++i) rel_slots[i] = static_cast<RelationId>(i);
  const QueryGraph skeleton = instantiate_template(tag, anchor_slots, rel_slots);

  std::vector<std::optional<EntityId>> anchors(num_anchors);
  std::vector<std::optional<RelationId>> rels(num_rels);
  auto pick_active = [&] { return active[rng.index(active.size())]; };
  const EntityId target = pick_active();

  for (const ConjunctiveGraph& g : skeleton.disjuncts) {
    std::vector<std::optional<EntityId>> value(g.nodes.size());
    value[g.free_node()] = target;
    std::vector<char> done(g.edges.size(), 0);
    for (std::size_t remaining = g.edges.size(); remaining > 0;) {
      bool progressed = false;
      for (std::size_t i = 0; i < g.edges.size(); ++i) {
        const QueryEdge& e = g.edges[i];
        if (done[i] || !value[e.dst]) continue;
        const EntityId base = e.negated ? pick_active() : *value[e.dst];
        EntityId src_value = 0;
        if (rels[e.rel]) {
          const auto cands = kg.neighbors(base, kg.inverse(*rels[e.rel]));
          if (cands.empty()) return std::nullopt;
          src_value = cands[rng.index(cands.size())];
        } else {
          const auto out = kg.out_edges(base);
          if (out.empty()) return std::nullopt;
          const Triple& t = out[rng.index(out.size())];
          rels[e.rel] = kg.inverse(t.rel);
          src_value = t.tail;
        }
        if (value[e.src] && *value[e.src] != src_value) return std::nullopt;
        value[e.src] = src_value;
        const QueryNode& src = g.nodes[e.src];
        if (src.kind == NodeKind::Anchor) {
          if (anchors[src.entity] && *anchors[src.entity] != src_value) return std::nullopt;
          anchors[src.entity] = src_value;
        }
        done[i] = 1;
        --remaining;
        progressed = true;
      }
      if (!progressed) return std::nullopt;
    }
  }
  std::vector<EntityId> a;
  std::vector<RelationId> r;
  for (const auto& x : anchors) {
    if (!x) return std::nullopt;
    a.push_back(*x);
  }
  for (const auto& x : rels) {
    if (!x) return std::nullopt;
    r.push_back(*x);
  }
  return instantiate_template(tag, a, r);
}

}  // namespace

std::vector<QueryGraph> sample_queries(const SplitGraphs& splits, Template tag, std::size_t n,
                                       std::uint64_t seed, SampleMode mode) {
  constexpr std::size_t kAttemptsPerQuery = 100;
  const Kg& ground = mode == SampleMode::Full ? splits.full : splits.train_valid;
  std::vector<EntityId> active;
  for (EntityId e = 0; e < ground.num_entities(); ++e) {
    if (ground.out_degree(e) > 0) active.push_back(e);
  }
  if (n > 0 && active.empty()) throw SamplingError("graph has no edges to sample from");

  std::vector<QueryGraph> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(split_seed(seed, i));
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < kAttemptsPerQuery && !accepted; ++attempt) {
      auto q = sample_once(ground, tag, rng, active);
      if (!q) continue;
      LabeledAnswers labels = label_answers(splits, *q);
      const bool ok = mode == SampleMode::Full ? !labels.hard.empty() : !labels.easy.empty();
      if (!ok) continue;
      q->easy = std::move(labels.easy);
      q->hard = std::move(labels.hard);
      out.push_back(std::move(*q));
      accepted = true;
    }
    if (!accepted) {
      throw SamplingError("retry budget exhausted sampling " + std::string(template_name(tag)) +
                          " query " + std::to_string(i) + "; graph too sparse for the template");
    }
  }
  return out;
}

double latency_probe(const Kg& kg, Template tag, std::size_t n, std::uint64_t seed) {
  if (n == 0) return 0.0;
  const auto queries = sample_queries(single_split(kg), tag, n, seed, SampleMode::Partial);
  std::size_t sink = 0;
  const auto start = std::chrono::steady_clock::now();
  for (const QueryGraph& q : queries) sink += answer_set(kg, q).size();
  const auto stop = std::chrono::steady_clock::now();
  if (sink == SIZE_MAX) return -1.0;
  return std::chrono::duration<double>(stop - start).count() / static_cast<double>(n);
}

}  // namespace lvsa
