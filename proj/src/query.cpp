#include "lvsa/query.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>

#include <json.hpp>

#include "lvsa/error.hpp"

namespace lvsa {

using ojson = nlohmann::ordered_json;

NodeIndex ConjunctiveGraph::free_node() const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind == NodeKind::Free) return static_cast<NodeIndex>(i);
  }
  throw StructureError("conjunctive graph has no free node");
}

std::size_t ConjunctiveGraph::num_existentials() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) {
    return n.kind == NodeKind::Existential;
  }));
}

std::optional<NodeIndex> ConjunctiveGraph::find_var(VarId var) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind == NodeKind::Existential && nodes[i].var == var) {
      return static_cast<NodeIndex>(i);
    }
  }
  return std::nullopt;
}

namespace {

constexpr std::array<std::string_view, 14> kTemplateNames = {
    "1p", "2p", "3p", "2i", "3i", "pi", "ip", "2u", "up", "2in", "3in", "inp", "pin", "pni"};

struct EdgeShape {
  NodeIndex src;
  std::size_t rel_slot;
  NodeIndex dst;
  bool negated = false;
};

// Node codes: 'a' anchor (slots consumed in order), 'v' existential, 'f' free.
struct ConjShape {
  std::string_view nodes;
  std::vector<EdgeShape> edges;
};

struct TemplateShape {
  std::vector<ConjShape> disjuncts;
};

const TemplateShape& shape_of(Template t) {
  static const std::array<TemplateShape, 14> shapes = {{
      {{{"af", {{0, 0, 1}}}}},
      {{{"avf", {{0, 0, 1}, {1, 1, 2}}}}},
      {{{"avvf", {{0, 0, 1}, {1, 1, 2}, {2, 2, 3}}}}},
      {{{"aaf", {{0, 0, 2}, {1, 1, 2}}}}},
      {{{"aaaf", {{0, 0, 3}, {1, 1, 3}, {2, 2, 3}}}}},
      {{{"avaf", {{0, 0, 1}, {1, 1, 3}, {2, 2, 3}}}}},
      {{{"aavf", {{0, 0, 2}, {1, 1, 2}, {2, 2, 3}}}}},
      {{{"af", {{0, 0, 1}}}, {"af", {{0, 1, 1}}}}},
      {{{"avf", {{0, 0, 1}, {1, 2, 2}}}, {"avf", {{0, 1, 1}, {1, 2, 2}}}}},
      {{{"aaf", {{0, 0, 2}, {1, 1, 2, true}}}}},
      {{{"aaaf", {{0, 0, 3}, {1, 1, 3}, {2, 2, 3, true}}}}},
      {{{"aavf", {{0, 0, 2}, {1, 1, 2, true}, {2, 2, 3}}}}},
      {{{"avaf", {{0, 0, 1}, {1, 1, 3}, {2, 2, 3, true}}}}},
      {{{"avaf", {{0, 0, 1}, {1, 1, 3, true}, {2, 2, 3}}}}},
  }};
  return shapes[static_cast<std::size_t>(t)];
}

}  // namespace

std::string_view template_name(Template t) { return kTemplateNames[static_cast<std::size_t>(t)]; }

std::optional<Template> parse_template(std::string_view name) {
  for (std::size_t i = 0; i < kTemplateNames.size(); ++i) {
    if (kTemplateNames[i] == name) return static_cast<Template>(i);
  }
  return std::nullopt;
}

bool has_negation(Template t) {
  switch (t) {
    case Template::k2in:
    case Template::k3in:
    case Template::kInp:
    case Template::kPin:
    case Template::kPni:
      return true;
    default:
      return false;
  }
}

std::pair<std::size_t, std::size_t> template_arity(Template t) {
  std::size_t anchors = 0;
  std::size_t rels = 0;
  for (const auto& conj : shape_of(t).disjuncts) {
    anchors += static_cast<std::size_t>(std::count(conj.nodes.begin(), conj.nodes.end(), 'a'));
    for (const auto& e : conj.edges) rels = std::max(rels, e.rel_slot + 1);
  }
  return {anchors, rels};
}

QueryGraph instantiate_template(Template tag, std::span<const EntityId> anchors,
                                std::span<const RelationId> rels) {
  const auto [num_anchors, num_rels] = template_arity(tag);
  if (anchors.size() != num_anchors || rels.size() != num_rels) {
    throw ArityError(std::string(template_name(tag)) + " needs " + std::to_string(num_anchors) +
                     " anchors and " + std::to_string(num_rels) + " relations, got " +
                     std::to_string(anchors.size()) + " and " + std::to_string(rels.size()));
  }
  QueryGraph q;
  q.tag = tag;
  std::size_t anchor_slot = 0;
  for (const auto& shape : shape_of(tag).disjuncts) {
    ConjunctiveGraph g;
    VarId next_var = 0;
    for (char c : shape.nodes) {
      if (c == 'a') {
        g.nodes.push_back(QueryNode::anchor(anchors[anchor_slot++]));
      } else if (c == 'v') {
        g.nodes.push_back(QueryNode::existential(next_var++));
      } else {
        g.nodes.push_back(QueryNode::free());
      }
    }
    for (const auto& e : shape.edges) {
      g.edges.push_back({e.src, rels[e.rel_slot], e.dst, e.negated});
    }
    q.disjuncts.push_back(std::move(g));
  }
  return q;
}

// ---------------------------------------------------------------------------
// Skolem annotation and ordering

std::size_t AnnotatedGraph::count_independent() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) {
    return n.dependency == VarDependency::Independent;
  }));
}

std::size_t AnnotatedGraph::count_dependent() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) {
    return n.dependency == VarDependency::Dependent;
  }));
}

std::size_t AnnotatedGraph::count_aux() const {
  std::size_t n = 0;
  for (const auto& a : nodes) n += a.backward.size();
  return n;
}

std::size_t AnnotatedGraph::count_negated() const {
  std::size_t n = 0;
  for (const auto& a : nodes) {
    for (const auto& l : a.forward) n += l.negated ? 1 : 0;
    for (const auto& l : a.backward) n += l.negated ? 1 : 0;
  }
  return n;
}

AnnotatedGraph skolem_classify(const ConjunctiveGraph& g, std::size_t num_forward_relations) {
  const auto num_fwd = static_cast<RelationId>(num_forward_relations);
  auto inverse = [num_fwd](RelationId r) { return r < num_fwd ? r + num_fwd : r - num_fwd; };

  AnnotatedGraph out;
  out.graph = g;
  const NodeIndex free = g.free_node();
  out.ordering_edges.reserve(g.edges.size());
  for (const QueryEdge& e : g.edges) {
    if (e.src == free) {
      out.ordering_edges.push_back({e.dst, inverse(e.rel), e.src, e.negated});
    } else {
      out.ordering_edges.push_back(e);
    }
  }

  out.nodes.resize(g.nodes.size());
  std::vector<std::vector<std::uint32_t>> outgoing(g.nodes.size());
  for (std::uint32_t i = 0; i < out.ordering_edges.size(); ++i) {
    const QueryEdge& e = out.ordering_edges[i];
    out.nodes[e.dst].forward.push_back({e.src, e.rel, e.negated, i});
    outgoing[e.src].push_back(i);
  }
  for (std::size_t n = 0; n < g.nodes.size(); ++n) {
    NodeAnnotation& ann = out.nodes[n];
    ann.kind = g.nodes[n].kind;
    if (ann.kind != NodeKind::Existential) continue;
    if (ann.forward.empty() && outgoing[n].size() == 1) {
      ann.dependency = VarDependency::Independent;
      ann.skolem_rel = out.ordering_edges[outgoing[n].front()].rel;
      continue;
    }
    ann.dependency = VarDependency::Dependent;
    for (std::uint32_t idx : outgoing[n]) {
      const QueryEdge& e = out.ordering_edges[idx];
      ann.backward.push_back({inverse(e.rel), e.dst, e.negated, idx});
    }
  }
  return out;
}

TopoOrder toposort(const AnnotatedGraph& g) {
  const std::size_t n = g.graph.nodes.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<NodeIndex>> succ(n);
  for (const QueryEdge& e : g.ordering_edges) {
    ++indegree[e.dst];
    succ[e.src].push_back(e.dst);
  }
  std::priority_queue<NodeIndex, std::vector<NodeIndex>, std::greater<>> ready;
  for (NodeIndex i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  TopoOrder out;
  out.order.reserve(n);
  while (!ready.empty()) {
    const NodeIndex v = ready.top();
    ready.pop();
    out.order.push_back(v);
    for (NodeIndex w : succ[v]) {
      if (--indegree[w] == 0) ready.push(w);
    }
  }
  if (out.order.size() != n) throw CycleError("query graph contains a cycle");
  return out;
}

void validate_query(const QueryGraph& q, std::size_t num_entities, std::size_t num_relations) {
  if (q.disjuncts.empty()) throw StructureError("query has no disjuncts");
  std::set<VarId> vars;
  for (std::size_t d = 0; d < q.disjuncts.size(); ++d) {
    const ConjunctiveGraph& g = q.disjuncts[d];
    const std::string where = "disjunct " + std::to_string(d) + ": ";
    std::size_t free_count = 0;
    std::set<VarId> local_vars;
    for (const QueryNode& node : g.nodes) {
      switch (node.kind) {
        case NodeKind::Free:
          ++free_count;
          break;
        case NodeKind::Anchor:
          if (node.entity >= num_entities) throw BoundsError(where + "anchor entity out of range");
          break;
        case NodeKind::Existential:
          if (!local_vars.insert(node.var).second) {
            throw StructureError(where + "duplicate variable id " + std::to_string(node.var));
          }
          vars.insert(node.var);
          break;
      }
    }
    if (free_count != 1) {
      throw StructureError(where + "expected exactly one free node, found " +
                           std::to_string(free_count));
    }
    std::vector<std::size_t> degree(g.nodes.size(), 0);
    for (const QueryEdge& e : g.edges) {
      if (e.src >= g.nodes.size() || e.dst >= g.nodes.size()) {
        throw StructureError(where + "edge endpoint out of range");
      }
      if (e.src == e.dst) throw StructureError(where + "self-loop edge");
      if (e.rel >= num_relations) throw BoundsError(where + "relation id out of range");
      if (g.nodes[e.dst].kind == NodeKind::Anchor) {
        throw StructureError(where + "edge points into an anchor node");
      }
      ++degree[e.src];
      ++degree[e.dst];
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      if (g.nodes[i].kind != NodeKind::Anchor && degree[i] == 0) {
        throw StructureError(where + "variable node " + std::to_string(i) + " has no edges");
      }
    }
    toposort(skolem_classify(g, num_relations / 2));
  }
  VarId expect = 0;
  for (VarId v : vars) {
    if (v != expect++) throw StructureError("variable ids are not dense from 0");
  }
}

// ---------------------------------------------------------------------------
// JSON lines

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ParseError(path + ": " + what);
}

const ojson& field(const ojson& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "." + key, "missing field");
  return *it;
}

std::string as_string(const ojson& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected string");
  return v.get<std::string>();
}

std::uint32_t as_index(const ojson& v, const std::string& path) {
  if (!v.is_number_unsigned()) fail(path, "expected non-negative integer");
  return v.get<std::uint32_t>();
}

AnswerSet parse_answers(const ojson& v, const Kg& kg, const std::string& path) {
  if (!v.is_array()) fail(path, "expected array");
  AnswerSet out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    const auto label = as_string(v[i], p);
    auto id = kg.find_entity(label);
    if (!id) throw VocabError(p + ": unknown entity '" + label + "'");
    out.push_back(*id);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

ojson answers_json(const AnswerSet& s, const Kg& kg) {
  ojson arr = ojson::array();
  for (EntityId e : s) arr.push_back(kg.entity_label(e));
  return arr;
}

}  // namespace

QueryGraph parse_query(std::string_view text, const Kg& kg) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("$: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("$", "expected object");

  QueryGraph q;
  if (auto it = doc.find("tag"); it != doc.end() && !it->is_null()) {
    const auto name = as_string(*it, "$.tag");
    q.tag = parse_template(name);
    if (!q.tag) fail("$.tag", "unknown template '" + name + "'");
  }
  const ojson& disjuncts = field(doc, "disjuncts", "$");
  if (!disjuncts.is_array()) fail("$.disjuncts", "expected array");
  for (std::size_t d = 0; d < disjuncts.size(); ++d) {
    const std::string dpath = "$.disjuncts[" + std::to_string(d) + "]";
    const ojson& conj = disjuncts[d];
    if (!conj.is_object()) fail(dpath, "expected object");
    ConjunctiveGraph g;
    const ojson& nodes = field(conj, "nodes", dpath);
    if (!nodes.is_array()) fail(dpath + ".nodes", "expected array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::string npath = dpath + ".nodes[" + std::to_string(i) + "]";
      if (!nodes[i].is_object()) fail(npath, "expected object");
      const auto kind = as_string(field(nodes[i], "kind", npath), npath + ".kind");
      if (kind == "anchor") {
        const auto label = as_string(field(nodes[i], "entity", npath), npath + ".entity");
        auto id = kg.find_entity(label);
        if (!id) throw VocabError(npath + ".entity: unknown entity '" + label + "'");
        g.nodes.push_back(QueryNode::anchor(*id));
      } else if (kind == "var") {
        g.nodes.push_back(
            QueryNode::existential(as_index(field(nodes[i], "id", npath), npath + ".id")));
      } else if (kind == "free") {
        g.nodes.push_back(QueryNode::free());
      } else {
        fail(npath + ".kind", "unknown node kind '" + kind + "'");
      }
    }
    const ojson& edges = field(conj, "edges", dpath);
    if (!edges.is_array()) fail(dpath + ".edges", "expected array");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string epath = dpath + ".edges[" + std::to_string(i) + "]";
      const ojson& e = edges[i];
      if (!e.is_object()) fail(epath, "expected object");
      QueryEdge edge;
      edge.src = as_index(field(e, "src", epath), epath + ".src");
      edge.dst = as_index(field(e, "dst", epath), epath + ".dst");
      const auto label = as_string(field(e, "rel", epath), epath + ".rel");
      auto rel = kg.find_relation(label);
      if (!rel) throw VocabError(epath + ".rel: unknown relation '" + label + "'");
      edge.rel = *rel;
      if (auto it = e.find("neg"); it != e.end()) {
        if (!it->is_boolean()) fail(epath + ".neg", "expected boolean");
        edge.negated = it->get<bool>();
      }
      g.edges.push_back(edge);
    }
    q.disjuncts.push_back(std::move(g));
  }
  if (auto it = doc.find("easy"); it != doc.end()) q.easy = parse_answers(*it, kg, "$.easy");
  if (auto it = doc.find("hard"); it != doc.end()) q.hard = parse_answers(*it, kg, "$.hard");

  validate_query(q, kg.num_entities(), kg.num_relations());
  return q;
}

std::string serialize_query(const QueryGraph& q, const Kg& kg) {
  ojson doc;
  doc["tag"] = q.tag ? ojson(std::string(template_name(*q.tag))) : ojson(nullptr);
  ojson disjuncts = ojson::array();
  for (const ConjunctiveGraph& g : q.disjuncts) {
    ojson nodes = ojson::array();
    for (const QueryNode& n : g.nodes) {
      ojson node;
      switch (n.kind) {
        case NodeKind::Anchor:
          node["kind"] = "anchor";
          node["entity"] = kg.entity_label(n.entity);
          break;
        case NodeKind::Existential:
          node["kind"] = "var";
          node["id"] = n.var;
          break;
        case NodeKind::Free:
          node["kind"] = "free";
          break;
      }
      nodes.push_back(std::move(node));
    }
    ojson edges = ojson::array();
    for (const QueryEdge& e : g.edges) {
      ojson edge;
      edge["src"] = e.src;
      edge["rel"] = kg.relation_label(e.rel);
      edge["dst"] = e.dst;
      edge["neg"] = e.negated;
      edges.push_back(std::move(edge));
    }
    ojson conj;
    conj["nodes"] = std::move(nodes);
    conj["edges"] = std::move(edges);
    disjuncts.push_back(std::move(conj));
  }
  doc["disjuncts"] = std::move(disjuncts);
  if (q.easy) doc["easy"] = answers_json(*q.easy, kg);
  if (q.hard) doc["hard"] = answers_json(*q.hard, kg);
  return doc.dump();
}

std::vector<QueryGraph> read_queries(const std::filesystem::path& path, const Kg& kg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open query file " + path.string());
  std::vector<QueryGraph> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse_query(line, kg));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_queries(std::span<const QueryGraph> queries, const Kg& kg,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const QueryGraph& q : queries) out << serialize_query(q, kg) << '\n';
}

}  // namespace lvsa
