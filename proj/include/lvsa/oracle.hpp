#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lvsa/kg.hpp"
#include "lvsa/query.hpp"

namespace lvsa {

/// Exact A[Q] by grounding: existential variables are enumerated in
/// topological order. Positive literals are pruned through adjacency lists;
/// nodes without a positive in-literal range over the whole vocabulary.
AnswerSet answer_set(const Kg& kg, const QueryGraph& q);

/// As above with negated literals evaluated against `negation_kg`.
AnswerSet answer_set(const Kg& positive_kg, const Kg& negation_kg, const QueryGraph& q);
AnswerSet conjunct_answer_set(const Kg& positive_kg, const Kg& negation_kg,
                              const ConjunctiveGraph& g);

/// Reference enumeration over every assignment of every non-anchor node.
/// Exponential in the node count; only meant for tiny graphs.
/// One satisfying assignment (value per node), or nothing if unsatisfiable.
std::optional<std::vector<EntityId>> first_witness(const Kg& positive_kg, const Kg& negation_kg,
                                                   const ConjunctiveGraph& g);
AnswerSet naive_answer_set(const Kg& positive_kg, const Kg& negation_kg, const QueryGraph& q);

/// Values `node` takes across all satisfying assignments of `g`.
AnswerSet node_groundings(const Kg& positive_kg, const Kg& negation_kg,
                          const ConjunctiveGraph& g, NodeIndex node);

struct LabeledAnswers {
  AnswerSet easy;
  AnswerSet hard;
};

/// easy = A[Q] on train+valid, hard = A[Q] on full minus easy. Negation is
/// always checked against the full graph.
LabeledAnswers label_answers(const SplitGraphs& splits, const QueryGraph& q);

enum class SampleMode : std::uint8_t { Partial, Full };

/// Samples `n` labelled queries of one template. Query i draws from stream
/// split_seed(seed, i) and gets 100 attempts before a SamplingError.
/// Partial mode grounds on train+valid and requires easy answers; full mode
/// grounds on the full graph and requires hard answers.
std::vector<QueryGraph> sample_queries(const SplitGraphs& splits, Template tag, std::size_t n,
                                       std::uint64_t seed, SampleMode mode);

/// SplitGraphs whose three graphs are all `kg`.
SplitGraphs single_split(const Kg& kg);

/// Mean oracle wall time (seconds) per query over `n` sampled queries.
double latency_probe(const Kg& kg, Template tag, std::size_t n, std::uint64_t seed = 0);

}  // namespace lvsa
