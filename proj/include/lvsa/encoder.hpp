#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "lvsa/nn.hpp"
#include "lvsa/query.hpp"
#include "lvsa/vsa.hpp"

namespace lvsa {

/// Layer counts of the three networks; hidden widths equal each net's input width.
struct MlpLayers {
  std::size_t independent = 2;
  std::size_t dependent = 3;
  std::size_t negator = 2;
};

struct ModelShape {
  std::size_t dim = 0;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;  // 2R, inverse ids included
  MlpLayers layers;
  double slope = kDefaultLeakySlope;
};

/// Entity table, relation table (2R rows, inverses untied) and the
/// independent-variable, dependent-variable and negator networks.
struct ModelParams {
  EntityTable entities;
  EntityTable relations;
  Mlp mlp_i;
  Mlp mlp_d;
  Mlp mlp_n;

  std::size_t dim() const { return entities.dim(); }
  std::size_t num_forward_relations() const { return relations.rows() / 2; }

  bool operator==(const ModelParams&) const = default;
};

/// Layer widths for a net whose input is `in` wide and whose output is 2d.
std::vector<std::size_t> mlp_dims(std::size_t in, std::size_t out, std::size_t layers);

/// Seeded initialization. Embeddings ~ U(-scale, scale) with scale defaulting
/// to 1/sqrt(d); networks via mlp_init.
ModelParams init_params(const ModelShape& shape, std::uint64_t seed, double embed_scale = 0.0);

/// Validates table and network shapes against each other.
void check_params(const ModelParams& p);

// --- single-step encoder operations ----------------------------------------

/// phi(r (x) src) = bind(phi(r), src).
ComplexVec embed_literal(const ModelParams& p, ComplexView src, RelationId rel);
/// Skolem constant of an independent variable: MLP_I([re; im] of phi(r)).
ComplexVec embed_independent(const ModelParams& p, RelationId rel);
/// Skolem function of a dependent variable. `fwd` holds (source embedding,
/// relation) of incoming literals; `bwd` holds (aux embedding, inverse
/// relation) of inverted outgoing literals. An empty side is the zero vector.
ComplexVec embed_dependent(const ModelParams& p,
                           std::span<const std::pair<ComplexVec, RelationId>> fwd,
                           std::span<const std::pair<ComplexVec, RelationId>> bwd);
/// phi(not lit) = MLP_N(context (+) lit).
ComplexVec negate_literal(const ModelParams& p, ComplexView context, ComplexView lit);

// --- recorded computation ---------------------------------------------------

/// Which parameter blocks receive gradients.
struct GradMask {
  bool entities = true;
  bool relations = true;
  bool mlp_i = true;
  bool mlp_d = true;
  bool mlp_n = true;

  static GradMask all() { return {}; }
  static GradMask none() { return {false, false, false, false, false}; }
};

/// Gradient buffers shaped like ModelParams (flat, same layouts).
struct ParamGrads {
  std::vector<double> entities;
  std::vector<double> relations;
  std::vector<double> mlp_i;
  std::vector<double> mlp_d;
  std::vector<double> mlp_n;

  static ParamGrads zeros_like(const ModelParams& p);
  void add(const ParamGrads& other, double scale = 1.0);
  void scale(double s);
};

using Slot = std::uint32_t;

/// Straight-line record of one encoding: every intermediate complex vector
/// with the operation that produced it. Replaying it in reverse gives exact
/// gradients for the fixed computation graph of a query.
class Tape {
 public:
  enum class Op : std::uint8_t { Entity, Relation, Zero, Bind, NormAdd, MlpI, MlpD, MlpN };

  Tape(const ModelParams& p, bool record, GradMask mask = GradMask::all());

  Slot entity(EntityId e);
  Slot relation(RelationId r);
  Slot zero();
  Slot bind(Slot rel, Slot src);
  Slot norm_add(std::span<const Slot> inputs);
  Slot mlp_i(Slot rel);
  Slot mlp_d(Slot fwd, Slot bwd);
  Slot mlp_n(Slot context, Slot lit);

  const ComplexVec& value(Slot s) const { return values_[s]; }
  std::size_t size() const { return values_.size(); }
  std::size_t mlp_invocations() const { return mlp_calls_; }
  const ModelParams& params() const { return params_; }

  /// Reverse pass. `seed` holds the loss gradient for some slots (others
  /// empty); parameter gradients are added into `out` for masked-in blocks.
  void backward(std::vector<ComplexVec> seed, ParamGrads& out) const;

 private:
  struct Record {
    Op op;
    std::uint32_t id = 0;  // entity or relation id
    std::vector<Slot> args;
    MlpCache cache;
  };

  Slot push(Record rec, ComplexVec value, bool needs_grad);

  const ModelParams& params_;
  bool record_;
  GradMask mask_;
  std::vector<Record> records_;
  std::vector<ComplexVec> values_;
  std::vector<char> needs_grad_;
  std::size_t mlp_calls_ = 0;
};

/// A query with its per-disjunct Skolem annotation and topological order.
struct PreparedQuery {
  QueryGraph query;
  std::vector<AnnotatedGraph> annotated;
  std::vector<TopoOrder> orders;
};

PreparedQuery prepare_query(const QueryGraph& q, std::size_t num_forward_relations);

enum class Provenance : std::uint8_t { Anchor, Independent, Dependent, Bundle };
std::string_view provenance_name(Provenance p);

struct LiteralSlot {
  std::uint32_t edge = 0;
  bool negated = false;
  bool inverted = false;  // backward dependency rewritten through an aux variable
  Slot slot = 0;          // embedding after negation, when negated
};

/// A negated literal r(src, node) encoded as MLP_N(context (+) lit).
struct NegationSite {
  NodeIndex node = 0;
  std::uint32_t edge = 0;
  bool into_free = false;
  Slot context = 0;
  Slot literal = 0;
  Slot negated = 0;
};

struct NodeStep {
  NodeIndex node = 0;
  Provenance provenance = Provenance::Anchor;
  Slot slot = 0;
  std::vector<LiteralSlot> literals;
};

struct ConjunctEncoding {
  Slot output = 0;
  std::vector<NodeStep> steps;  // topological order
  std::vector<std::optional<Slot>> node_slot;
  std::vector<NegationSite> negations;
};

/// Walks `order`, appending the encoding of one conjunct to `tape`.
ConjunctEncoding encode_conjunct(Tape& tape, const AnnotatedGraph& g, const TopoOrder& order);

/// Top-k (entity, score) descending; ties by ascending entity id.
std::vector<std::pair<EntityId, double>> top_k(std::span<const double> scores, std::size_t k);

struct TraceLiteral {
  std::uint32_t edge = 0;
  bool negated = false;
  bool inverted = false;
  ComplexVec embedding;
};

struct TraceNode {
  NodeIndex node = 0;
  Provenance provenance = Provenance::Anchor;
  ComplexVec embedding;
  std::vector<TraceLiteral> literals;
  std::vector<std::pair<EntityId, double>> grounding;
};

struct DisjunctTrace {
  std::vector<TraceNode> nodes;
  ComplexVec output;
};

struct EncodeTrace {
  std::vector<DisjunctTrace> disjuncts;
};

/// phi(c) of one conjunct plus its reasoning trace (top-k groundings per node).
std::pair<ComplexVec, DisjunctTrace> encode_conjunct(const ModelParams& p, const AnnotatedGraph& g,
                                                     const TopoOrder& order,
                                                     std::size_t top = 5);

EncodeTrace trace_query(const ModelParams& p, const QueryGraph& q, std::size_t top = 5);

/// Per-entity score: elementwise max over the disjuncts' herm scores.
std::vector<double> score_query(const ModelParams& p, const QueryGraph& q);
std::vector<double> score_query(const ModelParams& p, const PreparedQuery& q);

/// Number of network invocations score_query makes for `q`.
std::size_t count_mlp_invocations(const ModelParams& p, const QueryGraph& q);

/// Ranks every entity against the embedding of existential variable `var`.
std::vector<std::pair<EntityId, double>> ground_variable(const ModelParams& p, const QueryGraph& q,
                                                         VarId var, std::size_t k);

}  // namespace lvsa
