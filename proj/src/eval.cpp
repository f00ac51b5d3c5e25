#include "lvsa/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "lvsa/error.hpp"
#include "lvsa/oracle.hpp"
#include "lvsa/random.hpp"

namespace lvsa {

namespace {

bool contains_sorted(const AnswerSet& s, EntityId e) {
  return std::binary_search(s.begin(), s.end(), e);
}

// Sorted summation so aggregates do not depend on query order.
double stable_mean(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

struct Accumulator {
  std::vector<double> mrr, h1, h3, h10;

  void add(const Metrics& m) {
    mrr.push_back(m.mrr);
    h1.push_back(m.h1);
    h3.push_back(m.h3);
    h10.push_back(m.h10);
  }
  Metrics finish() const {
    Metrics m;
    m.n = mrr.size();
    m.mrr = stable_mean(mrr);
    m.h1 = stable_mean(h1);
    m.h3 = stable_mean(h3);
    m.h10 = stable_mean(h10);
    return m;
  }
};

nlohmann::ordered_json metrics_json(const Metrics& m) {
  return {{"mrr", m.mrr}, {"h1", m.h1}, {"h3", m.h3}, {"h10", m.h10}, {"n", m.n}};
}

AnswerSet set_union(const AnswerSet& a, const AnswerSet& b) {
  AnswerSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

std::vector<RankedAnswer> filtered_rank(std::span<const double> scores, const AnswerSet& answers,
                                        const AnswerSet& filter_out) {
  if (answers.empty()) throw MetricError("filtered_rank: empty answer set");
  for (EntityId a : answers) {
    if (a >= scores.size()) throw MetricError("filtered_rank: answer id out of range");
  }
  // Competitors are the entities neither filtered nor answers themselves.
  std::vector<double> competitors;
  competitors.reserve(scores.size());
  for (std::size_t e = 0; e < scores.size(); ++e) {
    const auto id = static_cast<EntityId>(e);
    if (contains_sorted(answers, id) || contains_sorted(filter_out, id)) continue;
    competitors.push_back(scores[e]);
  }
  std::sort(competitors.begin(), competitors.end());
  std::vector<RankedAnswer> out;
  out.reserve(answers.size());
  for (EntityId a : answers) {
    const auto above = competitors.end() -
                       std::upper_bound(competitors.begin(), competitors.end(), scores[a]);
    out.push_back({a, 1 + static_cast<std::size_t>(above)});
  }
  return out;
}

Metrics query_metrics(std::span<const RankedAnswer> ranks) {
  Metrics m;
  if (ranks.empty()) throw MetricError("query_metrics: no ranked answers");
  for (const RankedAnswer& r : ranks) {
    m.mrr += 1.0 / static_cast<double>(r.rank);
    m.h1 += r.rank <= 1 ? 1.0 : 0.0;
    m.h3 += r.rank <= 3 ? 1.0 : 0.0;
    m.h10 += r.rank <= 10 ? 1.0 : 0.0;
  }
  const auto n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.h1 /= n;
  m.h3 /= n;
  m.h10 /= n;
  m.n = ranks.size();
  return m;
}

RankingReport evaluate(const Scorer& scorer, std::span<const QueryGraph> queries) {
  RankingReport report;
  std::map<std::string, Accumulator> tags;
  Accumulator overall;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const QueryGraph& q = queries[i];
    if (!q.easy || !q.hard) {
      throw DataError("query " + std::to_string(i) + " has no easy/hard answer labels");
    }
    if (q.hard->empty()) {
      ++report.skipped;
      continue;
    }
    const std::vector<double> scores = scorer(q);
    QueryResult r;
    r.tag = q.tag;
    r.ranks = filtered_rank(scores, *q.hard, set_union(*q.easy, *q.hard));
    r.metrics = query_metrics(r.ranks);
    tags[q.tag ? std::string(template_name(*q.tag)) : "untagged"].add(r.metrics);
    overall.add(r.metrics);
    report.queries.push_back(std::move(r));
  }
  std::vector<double> pos, neg;
  for (const auto& [name, acc] : tags) {
    report.per_tag[name] = acc.finish();
    if (const auto t = parse_template(name)) {
      (has_negation(*t) ? neg : pos).push_back(report.per_tag[name].mrr);
    }
  }
  report.overall = overall.finish();
  if (!pos.empty()) report.a_p = stable_mean(pos);
  if (!neg.empty()) report.a_n = stable_mean(neg);
  return report;
}

RankingReport evaluate(const ModelParams& p, std::span<const QueryGraph> queries) {
  return evaluate([&p](const QueryGraph& q) { return score_query(p, q); }, queries);
}

RankingReport evaluate(const ModelParams& p, const SplitGraphs& splits,
                       std::span<const QueryGraph> queries) {
  if (p.entities.rows() != splits.full.num_entities() ||
      p.relations.rows() != splits.full.num_relations()) {
    throw DimensionError("model tables do not match the graph vocabularies");
  }
  return evaluate(p, queries);
}

Scorer oracle_scorer(const SplitGraphs& splits) {
  return [&splits](const QueryGraph& q) {
    std::vector<double> scores(splits.full.num_entities(), 0.0);
    for (EntityId e : answer_set(splits.full, splits.full, q)) scores[e] = 1.0;
    return scores;
  };
}

RankingReport random_ranking(std::span<const QueryGraph> queries, std::size_t num_entities,
                             std::uint64_t seed) {
  Rng rng(seed);
  return evaluate(
      [&](const QueryGraph&) {
        std::vector<double> s(num_entities);
        for (double& x : s) x = rng.uniform();
        return s;
      },
      queries);
}

nlohmann::ordered_json report_json(const RankingReport& r, bool per_query) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json tags = nlohmann::ordered_json::object();
  for (const auto& [name, m] : r.per_tag) tags[name] = metrics_json(m);
  j["tags"] = tags;
  j["a_p"] = r.a_p ? nlohmann::ordered_json(*r.a_p) : nlohmann::ordered_json(nullptr);
  j["a_n"] = r.a_n ? nlohmann::ordered_json(*r.a_n) : nlohmann::ordered_json(nullptr);
  j["overall"] = metrics_json(r.overall);
  j["skipped"] = r.skipped;
  if (per_query) {
    auto qs = nlohmann::ordered_json::array();
    for (const QueryResult& q : r.queries) {
      auto ranks = nlohmann::ordered_json::array();
      for (const RankedAnswer& a : q.ranks) ranks.push_back({a.answer, a.rank});
      qs.push_back({{"tag", q.tag ? nlohmann::ordered_json(std::string(template_name(*q.tag)))
                                  : nlohmann::ordered_json(nullptr)},
                    {"ranks", ranks}});
    }
    j["queries"] = qs;
  }
  return j;
}

// --- interpretability --------------------------------------------------------

NodeScorer model_node_scorer(const ModelParams& p) {
  return [&p](const QueryGraph& q, NodeIndex node) {
    const ConjunctiveGraph& g = q.disjuncts.at(0);
    const AnnotatedGraph ann = skolem_classify(g, p.num_forward_relations());
    Tape tape(p, false);
    const ConjunctEncoding enc = encode_conjunct(tape, ann, toposort(ann));
    const auto slot = node == g.free_node() ? std::optional<Slot>(enc.output) : enc.node_slot.at(node);
    if (!slot) throw StructureError("node has no embedding");
    return score_all(tape.value(*slot), p.entities);
  };
}

NodeScorer oracle_node_scorer(const SplitGraphs& splits) {
  return [&splits](const QueryGraph& q, NodeIndex node) {
    std::vector<double> scores(splits.full.num_entities(), 0.0);
    const ConjunctiveGraph& g = q.disjuncts.at(0);
    for (EntityId e : node_groundings(splits.full, splits.full, g, node)) scores[e] = 1.0;
    // one shared witness on top so the argmaxes agree with each other
    if (const auto w = first_witness(splits.full, splits.full, g)) scores[(*w)[node]] = 2.0;
    return scores;
  };
}

InterpReport interpret(const NodeScorer& scorer, const SplitGraphs& splits,
                       std::span<const QueryGraph> queries) {
  const Kg& full = splits.full;
  InterpReport report;
  std::map<VarId, Accumulator> vars;
  std::size_t valid_paths = 0;
  for (const QueryGraph& q : queries) {
    if (q.disjuncts.size() != 1) throw StructureError("interpret: disjunctive query");
    const ConjunctiveGraph& g = q.disjuncts[0];
    if (g.num_existentials() == 0) throw StructureError("interpret: query has no existential");
    std::vector<EntityId> assignment(g.nodes.size(), 0);
    for (NodeIndex n = 0; n < g.nodes.size(); ++n) {
      const QueryNode& node = g.nodes[n];
      if (node.kind == NodeKind::Anchor) {
        assignment[n] = node.entity;
        continue;
      }
      const std::vector<double> scores = scorer(q, n);
      assignment[n] = top_k(scores, 1).at(0).first;
      if (node.kind != NodeKind::Existential) continue;
      const AnswerSet correct = node_groundings(full, full, g, n);
      if (correct.empty()) continue;
      vars[node.var].add(query_metrics(filtered_rank(scores, correct, correct)));
    }
    bool ok = true;
    for (const QueryEdge& e : g.edges) {
      if (full.contains(assignment[e.src], e.rel, assignment[e.dst]) == e.negated) {
        ok = false;
        break;
      }
    }
    valid_paths += ok ? 1 : 0;
    ++report.n_queries;
  }
  for (const auto& [v, acc] : vars) report.variables[v] = acc.finish();
  if (report.n_queries > 0) {
    report.path_precision =
        static_cast<double>(valid_paths) / static_cast<double>(report.n_queries);
  }
  return report;
}

InterpReport interpret(const ModelParams& p, const SplitGraphs& splits,
                       std::span<const QueryGraph> queries) {
  return interpret(model_node_scorer(p), splits, queries);
}

nlohmann::ordered_json interp_json(const InterpReport& r) {
  nlohmann::ordered_json vars = nlohmann::ordered_json::object();
  for (const auto& [v, m] : r.variables) {
    vars["V" + std::to_string(v)] = {{"mrr", m.mrr}, {"h1", m.h1}, {"n", m.n}};
  }
  return {{"variables", vars}, {"path_precision", r.path_precision}, {"n", r.n_queries}};
}

// --- latency -----------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double median_mean_seconds(std::size_t n, std::size_t reps, F&& run_one) {
  std::vector<double> means;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto start = Clock::now();
    for (std::size_t i = 0; i < n; ++i) run_one(i);
    const std::chrono::duration<double> dt = Clock::now() - start;
    means.push_back(dt.count() / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());
  const std::size_t m = means.size();
  return m % 2 == 1 ? means[m / 2] : 0.5 * (means[m / 2 - 1] + means[m / 2]);
}

}  // namespace

DichotomyTable bench_dichotomy(const ModelParams& p, const Kg& kg, std::span<const Template> tags,
                               std::size_t n, std::uint64_t seed, std::size_t repetitions) {
  DichotomyTable table;
  if (n == 0 || tags.empty()) return table;
  if (repetitions == 0) repetitions = 1;
  const SplitGraphs splits = single_split(kg);
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const std::vector<QueryGraph> qs =
        sample_queries(splits, tags[t], n, split_seed(seed, t), SampleMode::Partial);
    LatencyRow row;
    row.tag = tags[t];
    row.n = n;
    row.mlp_calls = count_mlp_invocations(p, qs.front());
    volatile std::size_t sink = 0;
    row.encoder_seconds = median_mean_seconds(n, repetitions, [&](std::size_t i) {
      const std::vector<double> scores = score_query(p, qs[i]);
      std::vector<EntityId> order(scores.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](EntityId a, EntityId b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
      });
      sink = sink + order.front();
    });
    row.oracle_seconds = median_mean_seconds(n, repetitions, [&](std::size_t i) {
      sink = sink + answer_set(kg, qs[i]).size();
    });
    table.rows.push_back(row);
  }
  auto find = [&](Template t) -> const LatencyRow* {
    for (const LatencyRow& r : table.rows) {
      if (r.tag == t) return &r;
    }
    return nullptr;
  };
  const LatencyRow* one = find(Template::k1p);
  const LatencyRow* three = find(Template::k3p);
  if (one && three) {
    table.encoder_ratio = three->encoder_seconds / one->encoder_seconds;
    table.oracle_ratio = three->oracle_seconds / one->oracle_seconds;
  }
  return table;
}

nlohmann::ordered_json dichotomy_json(const DichotomyTable& t) {
  auto rows = nlohmann::ordered_json::array();
  for (const LatencyRow& r : t.rows) {
    rows.push_back({{"tag", std::string(template_name(r.tag))},
                    {"n", r.n},
                    {"encoder_seconds", r.encoder_seconds},
                    {"oracle_seconds", r.oracle_seconds},
                    {"mlp_calls", r.mlp_calls}});
  }
  auto opt = [](const std::optional<double>& x) {
    return x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr);
  };
  return {{"rows", rows}, {"encoder_ratio", opt(t.encoder_ratio)},
          {"oracle_ratio", opt(t.oracle_ratio)}};
}

}  // namespace lvsa
