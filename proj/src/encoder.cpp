#include "lvsa/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lvsa/error.hpp"
#include "lvsa/random.hpp"

namespace lvsa {

std::vector<std::size_t> mlp_dims(std::size_t in, std::size_t out, std::size_t layers) {
  if (layers == 0) throw DimensionError("network needs at least one layer");
  std::vector<std::size_t> dims(layers, in);
  dims.push_back(out);
  return dims;
}

ModelParams init_params(const ModelShape& shape, std::uint64_t seed, double embed_scale) {
  if (shape.dim == 0) throw DimensionError("embedding dimension must be positive");
  const std::size_t d = shape.dim;
  ModelParams p;
  p.entities = EntityTable(shape.num_entities, d);
  p.relations = EntityTable(shape.num_relations, d);
  const double scale = embed_scale > 0.0 ? embed_scale : 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(split_seed(seed, 0));
  for (double& x : p.entities.data()) x = rng.uniform(-scale, scale);
  for (double& x : p.relations.data()) x = rng.uniform(-scale, scale);
  p.mlp_i = mlp_init(mlp_dims(2 * d, 2 * d, shape.layers.independent), split_seed(seed, 1),
                     shape.slope);
  p.mlp_d = mlp_init(mlp_dims(4 * d, 2 * d, shape.layers.dependent), split_seed(seed, 2),
                     shape.slope);
  p.mlp_n = mlp_init(mlp_dims(4 * d, 2 * d, shape.layers.negator), split_seed(seed, 3),
                     shape.slope);
  return p;
}

void check_params(const ModelParams& p) {
  const std::size_t d = p.dim();
  if (d == 0) throw DimensionError("model dimension is zero");
  if (p.relations.dim() != d) throw DimensionError("relation table dimension mismatch");
  if (p.relations.rows() % 2 != 0) throw DimensionError("relation table must have 2R rows");
  auto check = [&](const Mlp& m, std::size_t in, const char* name) {
    if (m.num_layers() == 0 || m.input_dim() != in || m.output_dim() != 2 * d ||
        m.params.size() != mlp_param_count(m.dims)) {
      throw DimensionError(std::string(name) + " shape does not match d = " + std::to_string(d));
    }
  };
  check(p.mlp_i, 2 * d, "MLP_I");
  check(p.mlp_d, 4 * d, "MLP_D");
  check(p.mlp_n, 4 * d, "MLP_N");
}

// ---------------------------------------------------------------------------

ComplexVec embed_literal(const ModelParams& p, ComplexView src, RelationId rel) {
  return bind(p.relations.row(rel), src);
}

ComplexVec embed_independent(const ModelParams& p, RelationId rel) {
  return split(forward(p.mlp_i, stack(p.relations.row(rel))));
}

namespace {

ComplexVec bundle_or_zero(const std::vector<ComplexVec>& parts, std::size_t d) {
  if (parts.empty()) return ComplexVec::zeros(d);
  return norm_add(std::span<const ComplexVec>(parts));
}

}  // namespace

ComplexVec embed_dependent(const ModelParams& p,
                           std::span<const std::pair<ComplexVec, RelationId>> fwd,
                           std::span<const std::pair<ComplexVec, RelationId>> bwd) {
  if (fwd.empty() && bwd.empty()) {
    throw StructureError("dependent variable needs at least one literal");
  }
  const std::size_t d = p.dim();
  std::vector<ComplexVec> f;
  std::vector<ComplexVec> b;
  for (const auto& [src, rel] : fwd) f.push_back(embed_literal(p, src, rel));
  for (const auto& [aux, rel] : bwd) b.push_back(embed_literal(p, aux, rel));
  return split(forward(p.mlp_d, concat_stacked(bundle_or_zero(f, d), bundle_or_zero(b, d))));
}

ComplexVec negate_literal(const ModelParams& p, ComplexView context, ComplexView lit) {
  if (context.dim() != p.dim() || lit.dim() != p.dim()) {
    throw DimensionError("negate_literal: dimension mismatch");
  }
  return split(forward(p.mlp_n, concat_stacked(context, lit)));
}

// ---------------------------------------------------------------------------

ParamGrads ParamGrads::zeros_like(const ModelParams& p) {
  ParamGrads g;
  g.entities.assign(p.entities.data().size(), 0.0);
  g.relations.assign(p.relations.data().size(), 0.0);
  g.mlp_i.assign(p.mlp_i.params.size(), 0.0);
  g.mlp_d.assign(p.mlp_d.params.size(), 0.0);
  g.mlp_n.assign(p.mlp_n.params.size(), 0.0);
  return g;
}

void ParamGrads::add(const ParamGrads& other, double s) {
  auto acc = [s](std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += s * b[i];
  };
  acc(entities, other.entities);
  acc(relations, other.relations);
  acc(mlp_i, other.mlp_i);
  acc(mlp_d, other.mlp_d);
  acc(mlp_n, other.mlp_n);
}

void ParamGrads::scale(double s) {
  for (auto* v : {&entities, &relations, &mlp_i, &mlp_d, &mlp_n}) {
    for (double& x : *v) x *= s;
  }
}

Tape::Tape(const ModelParams& p, bool record, GradMask mask)
    : params_(p), record_(record), mask_(mask) {}

Slot Tape::push(Record rec, ComplexVec value, bool needs_grad) {
  if (record_) {
    records_.push_back(std::move(rec));
    needs_grad_.push_back(needs_grad ? 1 : 0);
  }
  values_.push_back(std::move(value));
  return static_cast<Slot>(values_.size() - 1);
}

Slot Tape::entity(EntityId e) {
  return push({Op::Entity, e, {}, {}}, params_.entities.row(e).to_vec(), mask_.entities);
}

Slot Tape::relation(RelationId r) {
  return push({Op::Relation, r, {}, {}}, params_.relations.row(r).to_vec(), mask_.relations);
}

Slot Tape::zero() { return push({Op::Zero, 0, {}, {}}, ComplexVec::zeros(params_.dim()), false); }

Slot Tape::bind(Slot rel, Slot src) {
  auto v = lvsa::bind(values_[rel], values_[src]);
  const bool ng = record_ && (needs_grad_[rel] || needs_grad_[src]);
  return push({Op::Bind, 0, {rel, src}, {}}, std::move(v), ng);
}

Slot Tape::norm_add(std::span<const Slot> inputs) {
  std::vector<ComplexView> views;
  views.reserve(inputs.size());
  bool ng = false;
  for (Slot s : inputs) {
    views.emplace_back(values_[s]);
    if (record_) ng = ng || needs_grad_[s];
  }
  auto v = lvsa::norm_add(std::span<const ComplexView>(views));
  return push({Op::NormAdd, 0, {inputs.begin(), inputs.end()}, {}}, std::move(v), ng);
}

Slot Tape::mlp_i(Slot rel) {
  ++mlp_calls_;
  Record rec{Op::MlpI, 0, {rel}, {}};
  auto out = forward(params_.mlp_i, stack(values_[rel]), record_ ? &rec.cache : nullptr);
  const bool ng = record_ && (mask_.mlp_i || needs_grad_[rel]);
  return push(std::move(rec), split(out), ng);
}

Slot Tape::mlp_d(Slot fwd, Slot bwd) {
  ++mlp_calls_;
  Record rec{Op::MlpD, 0, {fwd, bwd}, {}};
  auto out = forward(params_.mlp_d, concat_stacked(values_[fwd], values_[bwd]),
                     record_ ? &rec.cache : nullptr);
  const bool ng = record_ && (mask_.mlp_d || needs_grad_[fwd] || needs_grad_[bwd]);
  return push(std::move(rec), split(out), ng);
}

Slot Tape::mlp_n(Slot context, Slot lit) {
  ++mlp_calls_;
  Record rec{Op::MlpN, 0, {context, lit}, {}};
  auto out = forward(params_.mlp_n, concat_stacked(values_[context], values_[lit]),
                     record_ ? &rec.cache : nullptr);
  const bool ng = record_ && (mask_.mlp_n || needs_grad_[context] || needs_grad_[lit]);
  return push(std::move(rec), split(out), ng);
}

void Tape::backward(std::vector<ComplexVec> grads, ParamGrads& out) const {
  if (!record_) throw Error("Tape::backward on a tape recorded without gradients");
  grads.resize(values_.size());
  const std::size_t d = params_.dim();
  auto add = [&](Slot s, ComplexView g) {
    if (!needs_grad_[s]) return;
    if (grads[s].re.empty()) grads[s] = ComplexVec::zeros(d);
    axpy(grads[s], g);
  };
  auto add_row = [d](std::vector<double>& table, std::size_t row, const ComplexVec& g) {
    double* base = table.data() + row * 2 * d;
    for (std::size_t k = 0; k < d; ++k) {
      base[k] += g.re[k];
      base[d + k] += g.im[k];
    }
  };
  auto mlp_back = [&](const Mlp& m, const Record& rec, const ComplexVec& g, bool train,
                      std::vector<double>& buf) {
    return ::lvsa::backward(m, rec.cache, stack(g), train ? std::span<double>(buf) : std::span<double>());
  };

  for (std::size_t i = values_.size(); i-- > 0;) {
    if (grads[i].re.empty() || !needs_grad_[i]) continue;
    const ComplexVec& g = grads[i];
    const Record& rec = records_[i];
    switch (rec.op) {
      case Op::Entity:
        if (mask_.entities) add_row(out.entities, rec.id, g);
        break;
      case Op::Relation:
        if (mask_.relations) add_row(out.relations, rec.id, g);
        break;
      case Op::Zero:
        break;
      case Op::Bind: {
        const auto bg = bind_backward(values_[rec.args[0]], values_[rec.args[1]], g);
        add(rec.args[0], bg.a);
        add(rec.args[1], bg.b);
        break;
      }
      case Op::NormAdd: {
        std::vector<ComplexView> views;
        for (Slot s : rec.args) views.emplace_back(values_[s]);
        const auto ig = norm_add_backward(views, g);
        for (std::size_t j = 0; j < rec.args.size(); ++j) add(rec.args[j], ig[j]);
        break;
      }
      case Op::MlpI: {
        const auto in = mlp_back(params_.mlp_i, rec, g, mask_.mlp_i, out.mlp_i);
        add(rec.args[0], split(in));
        break;
      }
      case Op::MlpD:
      case Op::MlpN: {
        const bool is_d = rec.op == Op::MlpD;
        const auto in = is_d ? mlp_back(params_.mlp_d, rec, g, mask_.mlp_d, out.mlp_d)
                             : mlp_back(params_.mlp_n, rec, g, mask_.mlp_n, out.mlp_n);
        const std::span<const double> all(in);
        add(rec.args[0], split(all.first(2 * d)));
        add(rec.args[1], split(all.subspan(2 * d)));
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------------

PreparedQuery prepare_query(const QueryGraph& q, std::size_t num_forward_relations) {
  PreparedQuery out;
  out.query = q;
  for (const ConjunctiveGraph& g : q.disjuncts) {
    out.annotated.push_back(skolem_classify(g, num_forward_relations));
    out.orders.push_back(toposort(out.annotated.back()));
  }
  return out;
}

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Anchor:
      return "anchor";
    case Provenance::Independent:
      return "mlp_i";
    case Provenance::Dependent:
      return "mlp_d";
    case Provenance::Bundle:
      return "bundle";
  }
  return "?";
}

namespace {

struct PendingLiteral {
  LiteralSlot lit;
  Slot raw = 0;  // embedding before negation
};

// Conjunction of literal embeddings. Negated literals go through the
// negator with the bundle of positive siblings as context (zero when there
// are none); the result bundles that context with the negated literals.
Slot bundle_literals(Tape& tape, std::vector<PendingLiteral>& lits, NodeIndex node,
                     bool into_free, ConjunctEncoding& enc) {
  std::vector<Slot> positive;
  for (const auto& l : lits) {
    if (!l.lit.negated) positive.push_back(l.raw);
  }
  const bool has_negation = positive.size() != lits.size();
  if (!has_negation) {
    if (positive.empty()) return tape.zero();
    return tape.norm_add(positive);
  }
  const std::optional<Slot> context =
      positive.empty() ? std::nullopt : std::optional<Slot>(tape.norm_add(positive));
  const Slot ctx = context ? *context : tape.zero();
  std::vector<Slot> parts;
  if (context) parts.push_back(*context);
  for (auto& l : lits) {
    if (!l.lit.negated) continue;
    const Slot neg = tape.mlp_n(ctx, l.raw);
    l.lit.slot = neg;
    parts.push_back(neg);
    enc.negations.push_back({node, l.lit.edge, into_free, ctx, l.raw, neg});
  }
  return tape.norm_add(parts);
}

}  // namespace

ConjunctEncoding encode_conjunct(Tape& tape, const AnnotatedGraph& g, const TopoOrder& order) {
  ConjunctEncoding enc;
  enc.node_slot.assign(g.graph.nodes.size(), std::nullopt);
  const NodeIndex free = g.graph.free_node();

  auto forward_literals = [&](const NodeAnnotation& ann) {
    std::vector<PendingLiteral> lits;
    for (const InLiteral& in : ann.forward) {
      const auto src = enc.node_slot[in.src];
      if (!src) throw StructureError("encoder: literal source not yet encoded");
      const Slot raw = tape.bind(tape.relation(in.rel), *src);
      lits.push_back({{in.edge, in.negated, false, raw}, raw});
    }
    return lits;
  };

  for (NodeIndex n : order.order) {
    const NodeAnnotation& ann = g.nodes[n];
    NodeStep step;
    step.node = n;
    switch (ann.kind) {
      case NodeKind::Anchor:
        step.provenance = Provenance::Anchor;
        step.slot = tape.entity(g.graph.nodes[n].entity);
        break;
      case NodeKind::Existential:
        if (ann.dependency == VarDependency::Independent) {
          step.provenance = Provenance::Independent;
          step.slot = tape.mlp_i(tape.relation(ann.skolem_rel));
        } else {
          step.provenance = Provenance::Dependent;
          auto fwd = forward_literals(ann);
          std::vector<PendingLiteral> bwd;
          for (const AuxLiteral& b : ann.backward) {
            const Slot aux = tape.mlp_i(tape.relation(b.inverse_rel));
            const Slot raw = tape.bind(tape.relation(b.inverse_rel), aux);
            bwd.push_back({{b.edge, b.negated, true, raw}, raw});
          }
          const Slot f = bundle_literals(tape, fwd, n, false, enc);
          const Slot b = bundle_literals(tape, bwd, n, false, enc);
          step.slot = tape.mlp_d(f, b);
          for (auto& l : fwd) step.literals.push_back(l.lit);
          for (auto& l : bwd) step.literals.push_back(l.lit);
        }
        break;
      case NodeKind::Free: {
        step.provenance = Provenance::Bundle;
        auto lits = forward_literals(ann);
        step.slot = bundle_literals(tape, lits, n, true, enc);
        for (auto& l : lits) step.literals.push_back(l.lit);
        break;
      }
    }
    enc.node_slot[n] = step.slot;
    enc.steps.push_back(std::move(step));
  }
  enc.output = *enc.node_slot[free];
  return enc;
}

std::vector<std::pair<EntityId, double>> top_k(std::span<const double> scores, std::size_t k) {
  std::vector<EntityId> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min(k, idx.size());
  auto better = [&](EntityId a, EntityId b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  std::vector<std::pair<EntityId, double>> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(idx[i], scores[idx[i]]);
  return out;
}

std::pair<ComplexVec, DisjunctTrace> encode_conjunct(const ModelParams& p, const AnnotatedGraph& g,
                                                     const TopoOrder& order, std::size_t top) {
  Tape tape(p, false);
  const ConjunctEncoding enc = encode_conjunct(tape, g, order);
  DisjunctTrace trace;
  std::vector<double> scores(p.entities.rows());
  for (const NodeStep& step : enc.steps) {
    TraceNode node;
    node.node = step.node;
    node.provenance = step.provenance;
    node.embedding = tape.value(step.slot);
    for (const LiteralSlot& l : step.literals) {
      node.literals.push_back({l.edge, l.negated, l.inverted, tape.value(l.slot)});
    }
    if (top > 0) {
      score_all(node.embedding, p.entities, scores);
      node.grounding = top_k(scores, top);
    }
    trace.nodes.push_back(std::move(node));
  }
  trace.output = tape.value(enc.output);
  return {trace.output, std::move(trace)};
}

EncodeTrace trace_query(const ModelParams& p, const QueryGraph& q, std::size_t top) {
  const PreparedQuery prepared = prepare_query(q, p.num_forward_relations());
  EncodeTrace out;
  for (std::size_t i = 0; i < q.disjuncts.size(); ++i) {
    out.disjuncts.push_back(
        encode_conjunct(p, prepared.annotated[i], prepared.orders[i], top).second);
  }
  return out;
}

std::vector<double> score_query(const ModelParams& p, const PreparedQuery& q) {
  std::vector<double> best;
  std::vector<double> scores(p.entities.rows());
  for (std::size_t i = 0; i < q.annotated.size(); ++i) {
    Tape tape(p, false);
    const ConjunctEncoding enc = encode_conjunct(tape, q.annotated[i], q.orders[i]);
    score_all(tape.value(enc.output), p.entities, scores);
    if (i == 0) {
      best = scores;
    } else {
      for (std::size_t e = 0; e < scores.size(); ++e) best[e] = std::max(best[e], scores[e]);
    }
  }
  return best;
}

std::vector<double> score_query(const ModelParams& p, const QueryGraph& q) {
  return score_query(p, prepare_query(q, p.num_forward_relations()));
}

std::size_t count_mlp_invocations(const ModelParams& p, const QueryGraph& q) {
  const PreparedQuery prepared = prepare_query(q, p.num_forward_relations());
  std::size_t total = 0;
  for (std::size_t i = 0; i < prepared.annotated.size(); ++i) {
    Tape tape(p, false);
    encode_conjunct(tape, prepared.annotated[i], prepared.orders[i]);
    total += tape.mlp_invocations();
  }
  return total;
}

std::vector<std::pair<EntityId, double>> ground_variable(const ModelParams& p, const QueryGraph& q,
                                                         VarId var, std::size_t k) {
  for (const ConjunctiveGraph& g : q.disjuncts) {
    const auto node = g.find_var(var);
    if (!node) continue;
    const AnnotatedGraph ann = skolem_classify(g, p.num_forward_relations());
    Tape tape(p, false);
    const ConjunctEncoding enc = encode_conjunct(tape, ann, toposort(ann));
    return top_k(score_all(tape.value(*enc.node_slot[*node]), p.entities), k);
  }
  throw StructureError("query has no existential variable with id " + std::to_string(var));
}

}  // namespace lvsa
