#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lvsa/encoder.hpp"
#include "lvsa/kg.hpp"
#include "lvsa/query.hpp"

namespace lvsa {

struct RankedAnswer {
  EntityId answer = 0;
  std::size_t rank = 0;

  bool operator==(const RankedAnswer&) const = default;
};

/// Filtered rank of every answer: 1 + number of entities outside
/// filter_out and answers scoring strictly higher. Ties never hurt (optimistic).
std::vector<RankedAnswer> filtered_rank(std::span<const double> scores, const AnswerSet& answers,
                                        const AnswerSet& filter_out);

struct Metrics {
  double mrr = 0.0;
  double h1 = 0.0;
  double h3 = 0.0;
  double h10 = 0.0;
  std::size_t n = 0;
};

/// MRR and Hits@k of one query, averaged over its answers.
Metrics query_metrics(std::span<const RankedAnswer> ranks);

struct QueryResult {
  std::optional<Template> tag;
  std::vector<RankedAnswer> ranks;
  Metrics metrics;
};

struct RankingReport {
  std::vector<QueryResult> queries;
  std::map<std::string, Metrics> per_tag;  // "untagged" for queries without a tag
  Metrics overall;
  std::optional<double> a_p;  // mean MRR over the positive templates present
  std::optional<double> a_n;  // mean MRR over the negation templates present
  std::size_t skipped = 0;    // queries without hard answers
};

nlohmann::ordered_json report_json(const RankingReport& r, bool per_query = false);

/// Scores every entity for a query (length |V|).
using Scorer = std::function<std::vector<double>(const QueryGraph&)>;

/// Ranks hard answers with easy and hard filtered. Queries without answer
/// labels raise DataError; queries whose hard set is empty are skipped.
RankingReport evaluate(const Scorer& scorer, std::span<const QueryGraph> queries);
RankingReport evaluate(const ModelParams& p, std::span<const QueryGraph> queries);
/// Same, checking that the model's tables match the graph vocabularies.
RankingReport evaluate(const ModelParams& p, const SplitGraphs& splits,
                       std::span<const QueryGraph> queries);

/// Indicator of membership in the exact answer set on the full graph.
Scorer oracle_scorer(const SplitGraphs& splits);

/// Report of a scorer drawing i.i.d. uniform scores (seeded).
RankingReport random_ranking(std::span<const QueryGraph> queries, std::size_t num_entities,
                             std::uint64_t seed);

// --- interpretability --------------------------------------------------------

/// Scores every entity as a grounding of node `node` of disjunct 0.
using NodeScorer = std::function<std::vector<double>(const QueryGraph&, NodeIndex node)>;

/// Node scorer from the encoder: herm score against the node's embedding;
/// the free node uses the query embedding.
NodeScorer model_node_scorer(const ModelParams& p);
/// Indicator of the node's valid groundings on the full graph.
NodeScorer oracle_node_scorer(const SplitGraphs& splits);

struct InterpReport {
  std::map<VarId, Metrics> variables;  // mrr and h1 per existential variable
  double path_precision = 0.0;
  std::size_t n_queries = 0;
};

nlohmann::ordered_json interp_json(const InterpReport& r);

/// Variable level: a grounding of V is correct iff it extends to a satisfying
/// assignment on the full graph. Path level: every node set to its argmax
/// grounding, all literals checked on the full graph.
InterpReport interpret(const NodeScorer& scorer, const SplitGraphs& splits,
                       std::span<const QueryGraph> queries);
InterpReport interpret(const ModelParams& p, const SplitGraphs& splits,
                       std::span<const QueryGraph> queries);

// --- latency -----------------------------------------------------------------

struct LatencyRow {
  Template tag = Template::k1p;
  std::size_t n = 0;
  double encoder_seconds = 0.0;  // per query
  double oracle_seconds = 0.0;   // per query
  std::size_t mlp_calls = 0;     // per query (constant within a template)
};

struct DichotomyTable {
  std::vector<LatencyRow> rows;
  std::optional<double> encoder_ratio;  // t(3p) / t(1p)
  std::optional<double> oracle_ratio;
};

nlohmann::ordered_json dichotomy_json(const DichotomyTable& t);

/// Median over `repetitions` of the mean per-query time. The encoder side
/// covers encoding, scoring every entity and sorting the ranking.
DichotomyTable bench_dichotomy(const ModelParams& p, const Kg& kg, std::span<const Template> tags,
                               std::size_t n, std::uint64_t seed, std::size_t repetitions = 5);

}  // namespace lvsa
