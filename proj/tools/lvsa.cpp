// lvsa command-line front end.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lvsa/config.hpp"
#include "lvsa/encoder.hpp"
#include "lvsa/error.hpp"
#include "lvsa/eval.hpp"
#include "lvsa/kg.hpp"
#include "lvsa/oracle.hpp"
#include "lvsa/query.hpp"
#include "lvsa/synth.hpp"
#include "lvsa/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace lvsa;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

// Prints to stdout when no path is given.
void emit(const std::string& out_path, const json& j) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    write_text(out_path, j.dump(2) + "\n");
  }
}

Template tag_from(const std::string& s) {
  const auto t = parse_template(s);
  if (!t) throw ParseError("unknown query template '" + s + "'");
  return *t;
}

// Empty graph carrying only the labels, for parsing queries against a checkpoint.
Kg label_graph(const Checkpoint& c) {
  if (!c.vocab) throw DataError("checkpoint has no vocabularies; pass --kg");
  return Kg(std::make_shared<const Vocabularies>(*c.vocab), {});
}

json groundings_json(const Kg& kg, const std::vector<std::pair<EntityId, double>>& g) {
  json out = json::array();
  for (const auto& [e, s] : g) out.push_back({{"entity", kg.entity_label(e)}, {"score", s}});
  return out;
}

json vec_json(const ComplexVec& v) { return {{"re", v.re}, {"im", v.im}}; }

json trace_json(const EncodeTrace& t, const Kg& kg, bool embeddings) {
  json ds = json::array();
  for (const DisjunctTrace& d : t.disjuncts) {
    json nodes = json::array();
    for (const TraceNode& n : d.nodes) {
      json lits = json::array();
      for (const TraceLiteral& l : n.literals) {
        json lj = {{"edge", l.edge}, {"negated", l.negated}, {"inverted", l.inverted}};
        if (embeddings) lj["embedding"] = vec_json(l.embedding);
        lits.push_back(lj);
      }
      json nj = {{"node", n.node},
                 {"provenance", std::string(provenance_name(n.provenance))},
                 {"literals", lits},
                 {"grounding", groundings_json(kg, n.grounding)}};
      if (embeddings) nj["embedding"] = vec_json(n.embedding);
      nodes.push_back(nj);
    }
    json dj = {{"nodes", nodes}};
    if (embeddings) dj["output"] = vec_json(d.output);
    ds.push_back(dj);
  }
  return {{"disjuncts", ds}};
}

void check_vocab_match(const Checkpoint& c, const Kg& kg) {
  if (c.params.entities.rows() != kg.num_entities() ||
      c.params.relations.rows() != kg.num_relations()) {
    throw DimensionError("checkpoint tables do not match the graph vocabularies");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Logic-constrained vector symbolic query answering over knowledge graphs"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "worker threads (computation is single-threaded)")
      ->check(CLI::PositiveNumber);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "build a graph directory from triple files");
  std::string in_train, in_valid, in_test, ingest_out;
  ingest->add_option("--train", in_train, "training triples (TSV)")->required();
  ingest->add_option("--valid", in_valid, "validation triples");
  ingest->add_option("--test", in_test, "test triples");
  ingest->add_option("--out", ingest_out, "output directory")->required();

  // gen-kg
  auto* gen_kg = app.add_subcommand("gen-kg", "write a seeded synthetic graph directory");
  SynthSpec synth;
  std::string gen_kg_out;
  gen_kg->add_option("--entities", synth.entities, "number of entities")->required();
  gen_kg->add_option("--relations", synth.relations, "number of forward relations")->required();
  gen_kg->add_option("--degree", synth.degree, "average forward out-degree")->required();
  gen_kg->add_option("--seed", synth.seed, "random seed");
  gen_kg->add_option("--out", gen_kg_out, "output directory")->required();

  // gen-queries
  auto* gen_q = app.add_subcommand("gen-queries", "sample labelled queries");
  std::string gq_kg, gq_tag, gq_mode = "full", gq_out, gq_graph = "splits";
  std::size_t gq_n = 0;
  std::uint64_t gq_seed = 0;
  bool gq_links = false;
  gen_q->add_option("--kg", gq_kg, "graph directory")->required();
  gen_q->add_option("--tag", gq_tag, "query template, e.g. 2p");
  gen_q->add_option("--n", gq_n, "number of queries");
  gen_q->add_option("--seed", gq_seed, "random seed");
  gen_q->add_option("--mode", gq_mode, "full: needs hard answers; partial: needs easy answers")
      ->check(CLI::IsMember({"full", "partial"}));
  gen_q->add_option("--graph", gq_graph,
                    "splits: train/valid/test labelling; train: every graph is the training graph")
      ->check(CLI::IsMember({"splits", "train"}));
  gen_q->add_flag("--links", gq_links, "emit one 1p query per (head, relation) pair instead");
  gen_q->add_option("--out", gq_out, "output JSONL")->required();

  // train
  auto* train = app.add_subcommand("train", "run one curriculum stage");
  int tr_stage = 0;
  std::string tr_kg, tr_queries, tr_config, tr_out, tr_init, tr_valid, tr_log;
  std::optional<std::uint64_t> tr_seed;
  train->add_option("--stage", tr_stage, "curriculum stage")->required()->check(CLI::Range(1, 3));
  train->add_option("--kg", tr_kg, "graph directory")->required();
  train->add_option("--queries", tr_queries, "training queries (JSONL)")->required();
  train->add_option("--config", tr_config, "run configuration file")->required();
  train->add_option("--out", tr_out, "output checkpoint")->required();
  train->add_option("--init", tr_init, "input checkpoint (required for stages 2 and 3)");
  train->add_option("--valid-queries", tr_valid, "validation queries for early stopping");
  train->add_option("--log", tr_log, "write the per-epoch log as JSON");
  train->add_option("--seed", tr_seed, "override the config seed");

  // eval
  auto* eval = app.add_subcommand("eval", "filtered ranking metrics");
  std::string ev_ckpt, ev_kg, ev_queries, ev_out;
  bool ev_per_query = false;
  eval->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
  eval->add_option("--kg", ev_kg, "graph directory")->required();
  eval->add_option("--queries", ev_queries, "labelled queries (JSONL)")->required();
  eval->add_option("--out", ev_out, "report JSON (stdout if omitted)");
  eval->add_flag("--per-query", ev_per_query, "include per-query ranks");

  // interpret
  auto* interp = app.add_subcommand("interpret", "variable- and path-level grounding metrics");
  std::string in_ckpt, in_kg, in_queries, in_out;
  interp->add_option("--ckpt", in_ckpt, "checkpoint")->required();
  interp->add_option("--kg", in_kg, "graph directory")->required();
  interp->add_option("--queries", in_queries, "2p/3p queries (JSONL)")->required();
  interp->add_option("--out", in_out, "report JSON (stdout if omitted)");

  // ground
  auto* ground = app.add_subcommand("ground", "rank groundings of an existential variable");
  std::string gr_ckpt, gr_queries, gr_kg;
  VarId gr_var = 0;
  std::size_t gr_k = 10;
  ground->add_option("--ckpt", gr_ckpt, "checkpoint")->required();
  ground->add_option("--queries", gr_queries, "queries (JSONL)")->required();
  ground->add_option("--var", gr_var, "existential variable id")->required();
  ground->add_option("--k", gr_k, "number of groundings");
  ground->add_option("--kg", gr_kg, "graph directory (labels default to the checkpoint's)");

  // trace
  auto* trace = app.add_subcommand("trace", "print the encoding trace of one query");
  std::string tc_ckpt, tc_query, tc_kg;
  std::size_t tc_k = 5;
  bool tc_embeddings = false;
  trace->add_option("--ckpt", tc_ckpt, "checkpoint")->required();
  trace->add_option("--query", tc_query, "one query as a JSON object")->required();
  trace->add_option("--k", tc_k, "groundings per node");
  trace->add_option("--kg", tc_kg, "graph directory (labels default to the checkpoint's)");
  trace->add_flag("--embeddings", tc_embeddings, "include embedding vectors");

  // bench
  auto* bench = app.add_subcommand("bench", "encoder vs oracle latency on 1p/2p/3p");
  std::string bn_ckpt, bn_kg, bn_out;
  std::size_t bn_n = 200;
  std::uint64_t bn_seed = 0;
  bench->add_option("--ckpt", bn_ckpt, "checkpoint")->required();
  bench->add_option("--kg", bn_kg, "graph directory")->required();
  bench->add_option("--n", bn_n, "queries per template");
  bench->add_option("--seed", bn_seed, "random seed");
  bench->add_option("--out", bn_out, "table JSON (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest) {
      write_kg_dir(compose_splits(in_train, in_valid, in_test), ingest_out);
    } else if (*gen_kg) {
      write_kg_dir(generate_kg(synth), gen_kg_out);
    } else if (*gen_q) {
      const SplitGraphs splits = load_kg_dir(gq_kg);
      const SplitGraphs graphs = gq_graph == "train" ? single_split(splits.train) : splits;
      std::vector<QueryGraph> qs;
      if (gq_links) {
        qs = link_queries(graphs.full);
        for (QueryGraph& q : qs) {
          const LabeledAnswers la = label_answers(graphs, q);
          q.easy = la.easy;
          q.hard = la.hard;
        }
      } else {
        if (gq_tag.empty()) throw CLI::RequiredError("--tag");
        qs = sample_queries(graphs, tag_from(gq_tag), gq_n, gq_seed,
                            gq_mode == "full" ? SampleMode::Full : SampleMode::Partial);
      }
      write_queries(qs, splits.full, gq_out);
    } else if (*train) {
      RunConfig cfg = load_config(tr_config);
      if (tr_seed) cfg.seed = *tr_seed;
      const SplitGraphs splits = load_kg_dir(tr_kg);
      Checkpoint ckpt = tr_init.empty() ? initial_checkpoint(splits.full, cfg)
                                        : load_checkpoint(tr_init);
      check_vocab_match(ckpt, splits.full);
      if (!ckpt.vocab) ckpt.vocab = splits.full.vocab();
      const std::vector<QueryGraph> data = read_queries(tr_queries, splits.full);
      std::vector<QueryGraph> valid;
      if (!tr_valid.empty()) valid = read_queries(tr_valid, splits.full);
      const TrainLog log = train_stage(ckpt, data, tr_stage, cfg, valid);
      save_checkpoint(ckpt, tr_out);
      if (!tr_log.empty()) write_text(tr_log, train_log_json(log).dump(2) + "\n");
      if (!log.epochs.empty()) {
        std::cerr << "stage " << tr_stage << ": " << log.epochs.size()
                  << " epochs, final loss " << log.epochs.back().loss << '\n';
      }
    } else if (*eval) {
      const Checkpoint ckpt = load_checkpoint(ev_ckpt);
      const SplitGraphs splits = load_kg_dir(ev_kg);
      const std::vector<QueryGraph> qs = read_queries(ev_queries, splits.full);
      emit(ev_out, report_json(evaluate(ckpt.params, splits, qs), ev_per_query));
    } else if (*interp) {
      const Checkpoint ckpt = load_checkpoint(in_ckpt);
      const SplitGraphs splits = load_kg_dir(in_kg);
      check_vocab_match(ckpt, splits.full);
      const std::vector<QueryGraph> qs = read_queries(in_queries, splits.full);
      emit(in_out, interp_json(interpret(ckpt.params, splits, qs)));
    } else if (*ground) {
      const Checkpoint ckpt = load_checkpoint(gr_ckpt);
      const Kg kg = gr_kg.empty() ? label_graph(ckpt) : load_kg_dir(gr_kg).full;
      check_vocab_match(ckpt, kg);
      const std::vector<QueryGraph> qs = read_queries(gr_queries, kg);
      for (std::size_t i = 0; i < qs.size(); ++i) {
        const json line = {{"query", i},
                           {"var", gr_var},
                           {"groundings",
                            groundings_json(kg, ground_variable(ckpt.params, qs[i], gr_var, gr_k))}};
        std::cout << line.dump() << '\n';
      }
    } else if (*trace) {
      const Checkpoint ckpt = load_checkpoint(tc_ckpt);
      const Kg kg = tc_kg.empty() ? label_graph(ckpt) : load_kg_dir(tc_kg).full;
      check_vocab_match(ckpt, kg);
      const QueryGraph q = parse_query(tc_query, kg);
      std::cout << trace_json(trace_query(ckpt.params, q, tc_k), kg, tc_embeddings).dump(2)
                << '\n';
    } else if (*bench) {
      const Checkpoint ckpt = load_checkpoint(bn_ckpt);
      const SplitGraphs splits = load_kg_dir(bn_kg);
      check_vocab_match(ckpt, splits.full);
      const Template tags[] = {Template::k1p, Template::k2p, Template::k3p};
      emit(bn_out, dichotomy_json(bench_dichotomy(ckpt.params, splits.full, tags, bn_n, bn_seed)));
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
