#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lvsa/kg.hpp"

namespace lvsa {

using VarId = std::uint32_t;
using NodeIndex = std::uint32_t;

/// Sorted, duplicate-free list of entities.
using AnswerSet = std::vector<EntityId>;

enum class NodeKind : std::uint8_t { Anchor, Existential, Free };

struct QueryNode {
  NodeKind kind = NodeKind::Free;
  EntityId entity = 0;  // Anchor only
  VarId var = 0;        // Existential only

  static QueryNode anchor(EntityId e) { return {NodeKind::Anchor, e, 0}; }
  static QueryNode existential(VarId v) { return {NodeKind::Existential, 0, v}; }
  static QueryNode free() { return {NodeKind::Free, 0, 0}; }

  bool operator==(const QueryNode&) const = default;
};

struct QueryEdge {
  NodeIndex src = 0;
  RelationId rel = 0;
  NodeIndex dst = 0;
  bool negated = false;

  bool operator==(const QueryEdge&) const = default;
};

/// One conjunct c_i of the DNF: a DAG over anchor/existential/free nodes.
struct ConjunctiveGraph {
  std::vector<QueryNode> nodes;
  std::vector<QueryEdge> edges;

  NodeIndex free_node() const;
  std::size_t num_existentials() const;
  std::optional<NodeIndex> find_var(VarId var) const;

  bool operator==(const ConjunctiveGraph&) const = default;
};

enum class Template : std::uint8_t {
  k1p, k2p, k3p, k2i, k3i, kPi, kIp, k2u, kUp, k2in, k3in, kInp, kPin, kPni
};

inline constexpr std::array<Template, 14> kAllTemplates = {
    Template::k1p, Template::k2p,  Template::k3p,  Template::k2i,  Template::k3i,
    Template::kPi, Template::kIp,  Template::k2u,  Template::kUp,  Template::k2in,
    Template::k3in, Template::kInp, Template::kPin, Template::kPni};

std::string_view template_name(Template t);
std::optional<Template> parse_template(std::string_view name);
bool has_negation(Template t);
/// (anchor count, relation count) a template consumes.
std::pair<std::size_t, std::size_t> template_arity(Template t);

/// A DNF query: A[Q] is the union of the answer sets of its disjuncts.
struct QueryGraph {
  std::vector<ConjunctiveGraph> disjuncts;
  std::optional<Template> tag;
  std::optional<AnswerSet> easy;
  std::optional<AnswerSet> hard;

  bool operator==(const QueryGraph&) const = default;
};

/// Checks the structural invariants and that every id is in bounds; throws
/// StructureError / BoundsError / CycleError.
void validate_query(const QueryGraph& q, std::size_t num_entities, std::size_t num_relations);

enum class VarDependency : std::uint8_t { Independent, Dependent };

/// A literal r(src, node) feeding a node, possibly negated.
struct InLiteral {
  NodeIndex src = 0;
  RelationId rel = 0;
  bool negated = false;
  std::uint32_t edge = 0;  // index into ConjunctiveGraph::edges
};

/// A backward dependency r(node, w) rewritten by the Skolem inversion as
/// r^-1(aux, node), where aux is a fresh independent variable on r^-1.
struct AuxLiteral {
  RelationId inverse_rel = 0;
  NodeIndex target = 0;  // w, kept for traces
  bool negated = false;
  std::uint32_t edge = 0;
};

struct NodeAnnotation {
  NodeKind kind = NodeKind::Free;
  std::optional<VarDependency> dependency;  // Existential only
  RelationId skolem_rel = 0;                // Independent: relation of its sole literal
  std::vector<InLiteral> forward;           // incoming ordering edges
  std::vector<AuxLiteral> backward;         // Dependent only
};

/// A conjunct with Skolem labels. Edges leaving the free node are flipped to
/// their inverse so the free node is a sink of the ordering graph.
struct AnnotatedGraph {
  ConjunctiveGraph graph;
  std::vector<QueryEdge> ordering_edges;
  std::vector<NodeAnnotation> nodes;

  std::size_t count_independent() const;
  std::size_t count_dependent() const;
  std::size_t count_aux() const;
  std::size_t count_negated() const;
};

AnnotatedGraph skolem_classify(const ConjunctiveGraph& g, std::size_t num_forward_relations);

struct TopoOrder {
  std::vector<NodeIndex> order;

  bool operator==(const TopoOrder&) const = default;
};

/// Kahn's algorithm over the ordering edges; ties go to the smallest index.
TopoOrder toposort(const AnnotatedGraph& g);

QueryGraph instantiate_template(Template tag, std::span<const EntityId> anchors,
                                std::span<const RelationId> rels);

/// One JSON-lines record. Labels resolve against `kg`'s vocabularies.
QueryGraph parse_query(std::string_view text, const Kg& kg);
std::string serialize_query(const QueryGraph& q, const Kg& kg);

std::vector<QueryGraph> read_queries(const std::filesystem::path& path, const Kg& kg);
void write_queries(std::span<const QueryGraph> queries, const Kg& kg,
                   const std::filesystem::path& path);

}  // namespace lvsa
