#include "lvsa/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>

#include "lvsa/error.hpp"
#include "lvsa/eval.hpp"
#include "lvsa/random.hpp"

namespace lvsa {

namespace {

bool in_set(const std::optional<AnswerSet>& s, EntityId e) {
  return s && std::binary_search(s->begin(), s->end(), e);
}

AnswerSet training_answers(const QueryGraph& q) {
  AnswerSet out;
  const AnswerSet none;
  const AnswerSet& a = q.easy ? *q.easy : none;
  const AnswerSet& b = q.hard ? *q.hard : none;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// ln sigmoid(s), stable for large |s|.
double log_sigmoid(double s) { return s < 0.0 ? s - std::log1p(std::exp(s)) : -std::log1p(std::exp(-s)); }
double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

void add_entity_grad(std::vector<double>& table, std::size_t d, EntityId e, ComplexView g,
                     double scale) {
  double* row = table.data() + static_cast<std::size_t>(e) * 2 * d;
  for (std::size_t k = 0; k < d; ++k) {
    row[k] += scale * g.re[k];
    row[d + k] += scale * g.im[k];
  }
}

// Softmax cross-entropy over `candidates` for every answer in `answers`.
// Adds weight * dLoss/dscore into dscores and returns weight * loss.
double cross_entropy(std::span<const double> scores, std::span<const EntityId> candidates,
                     std::span<const EntityId> answers, double weight, std::vector<double>& dscores) {
  if (candidates.empty()) throw DataError("cross-entropy over an empty candidate set");
  double m = -INFINITY;
  for (EntityId e : candidates) m = std::max(m, scores[e]);
  double z = 0.0;
  for (EntityId e : candidates) z += std::exp(scores[e] - m);
  const double lse = m + std::log(z);
  const double k = static_cast<double>(answers.size());
  for (EntityId e : candidates) dscores[e] += weight * k * std::exp(scores[e] - lse);
  double loss = 0.0;
  for (EntityId t : answers) {
    loss += lse - scores[t];
    dscores[t] -= weight;
  }
  return weight * loss;
}

struct Group {
  const PreparedQuery* query;
  std::vector<EntityId> answers;
};

}  // namespace

void check_batch(const Batch& b) {
  if (b.items.empty()) throw DataError("empty batch");
  for (const BatchItem& it : b.items) {
    if (it.query == nullptr) throw DataError("batch item without a query");
    const QueryGraph& q = it.query->query;
    if (!in_set(q.easy, it.answer) && !in_set(q.hard, it.answer)) {
      throw DataError("batch answer " + std::to_string(it.answer) + " is not an answer of its query");
    }
  }
}

LossResult compute_loss(const ModelParams& p, const Batch& b, const LossSpec& spec, GradMask mask) {
  check_batch(b);
  const std::size_t V = p.entities.rows();
  const std::size_t d = p.dim();
  const double inv_n = 1.0 / static_cast<double>(b.items.size());
  LossResult out;
  out.grads = ParamGrads::zeros_like(p);

  std::vector<Group> groups;
  std::map<const PreparedQuery*, std::size_t> index;
  AnswerSet batch_union;
  for (const BatchItem& it : b.items) {
    auto [pos, inserted] = index.emplace(it.query, groups.size());
    if (inserted) groups.push_back({it.query, {}});
    groups[pos->second].answers.push_back(it.answer);
    batch_union.push_back(it.answer);
  }
  std::sort(batch_union.begin(), batch_union.end());
  batch_union.erase(std::unique(batch_union.begin(), batch_union.end()), batch_union.end());
  std::vector<EntityId> all(V);
  for (std::size_t e = 0; e < V; ++e) all[e] = static_cast<EntityId>(e);

  for (const Group& grp : groups) {
    const PreparedQuery& q = *grp.query;
    const double k = static_cast<double>(grp.answers.size());
    Tape tape(p, true, mask);
    std::vector<ConjunctEncoding> encs;
    for (std::size_t i = 0; i < q.annotated.size(); ++i) {
      encs.push_back(encode_conjunct(tape, q.annotated[i], q.orders[i]));
    }
    std::vector<NegationSite> sites;
    for (const ConjunctEncoding& enc : encs) {
      for (const NegationSite& s : enc.negations) {
        if (s.into_free) sites.push_back(s);
      }
    }
    if ((spec.ns || spec.nl) && sites.empty()) {
      throw StructureError("negation loss on a query without a negated literal into the answer");
    }
    // Double negation, appended before the reverse pass.
    std::vector<Slot> double_neg;
    if (spec.nl) {
      for (const NegationSite& s : sites) double_neg.push_back(tape.mlp_n(s.context, s.negated));
    }

    std::vector<ComplexVec> seeds(tape.size());
    auto seed = [&](Slot s, ComplexView g, double scale) {
      if (seeds[s].re.empty()) seeds[s] = ComplexVec::zeros(d);
      axpy(seeds[s], g, scale);
    };

    if (spec.ce) {
      std::vector<double> best(V, -INFINITY);
      std::vector<std::size_t> arg(V, 0);
      std::vector<double> scores(V);
      for (std::size_t i = 0; i < encs.size(); ++i) {
        score_all(tape.value(encs[i].output), p.entities, scores);
        for (std::size_t e = 0; e < V; ++e) {
          if (i == 0 || scores[e] > best[e]) {
            best[e] = scores[e];
            arg[e] = i;
          }
        }
      }
      std::vector<double> dbest(V, 0.0);
      out.ce += cross_entropy(best, all, grp.answers, inv_n, dbest);
      if (spec.candidates == Candidates::InBatchUnion) {
        out.ce += cross_entropy(best, batch_union, grp.answers, inv_n, dbest);
      }
      std::vector<ComplexVec> dq(encs.size(), ComplexVec::zeros(d));
      for (std::size_t e = 0; e < V; ++e) {
        if (dbest[e] == 0.0) continue;
        axpy(dq[arg[e]], p.entities.row(e), dbest[e]);
        if (mask.entities) {
          add_entity_grad(out.grads.entities, d, static_cast<EntityId>(e),
                          tape.value(encs[arg[e]].output), dbest[e]);
        }
      }
      for (std::size_t i = 0; i < encs.size(); ++i) seed(encs[i].output, dq[i], 1.0);
    }

    if (spec.ns) {
      const double alpha = spec.weights.alpha;
      for (const NegationSite& s : sites) {
        const ComplexVec& neg = tape.value(s.negated);
        for (EntityId t : grp.answers) {
          const ComplexView et = p.entities.row(t);
          const double sc = herm_score(neg, et);
          out.ns += -alpha * log_sigmoid(sc) * inv_n;
          const double ds = -alpha * sigmoid(-sc) * inv_n;
          seed(s.negated, et, ds);
          if (mask.entities) add_entity_grad(out.grads.entities, d, t, neg, ds);
        }
      }
    }

    if (spec.nl) {
      const double w = spec.weights.beta * k * inv_n;
      for (std::size_t j = 0; j < sites.size(); ++j) {
        const ComplexVec& x = tape.value(sites[j].literal);
        const ComplexVec& n1 = tape.value(sites[j].negated);
        const ComplexVec& n2 = tape.value(double_neg[j]);
        ComplexVec diff = n2;  // n2 - x
        axpy(diff, x, -1.0);
        ComplexVec sum = n1;  // n1 + x
        axpy(sum, x, 1.0);
        double sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
          sq += diff.re[c] * diff.re[c] + diff.im[c] * diff.im[c];
          sq += sum.re[c] * sum.re[c] + sum.im[c] * sum.im[c];
        }
        out.nl += w * sq;
        if (w == 0.0) continue;
        seed(double_neg[j], diff, 2.0 * w);
        seed(sites[j].literal, diff, -2.0 * w);
        seed(sites[j].literal, sum, 2.0 * w);
        seed(sites[j].negated, sum, 2.0 * w);
      }
    }

    tape.backward(std::move(seeds), out.grads);
  }
  out.total = out.ce + out.ns + out.nl;
  return out;
}

LossResult loss_ce(const ModelParams& p, const Batch& b, Candidates candidates, GradMask mask) {
  LossSpec s;
  s.candidates = candidates;
  return compute_loss(p, b, s, mask);
}

LossResult loss_ns(const ModelParams& p, const Batch& b, double alpha, GradMask mask) {
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  LossSpec s;
  s.ce = false;
  s.ns = true;
  s.weights.alpha = alpha;
  return compute_loss(p, b, s, mask);
}

LossResult loss_nl(const ModelParams& p, const Batch& b, double beta, GradMask mask) {
  if (beta < 0.0) throw ConfigError("beta must be >= 0");
  LossSpec s;
  s.ce = false;
  s.nl = true;
  s.weights.beta = beta;
  return compute_loss(p, b, s, mask);
}

// --- checkpoint ---------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'L', 'V', 'S', 'A'};

class Writer {
 public:
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void array(std::span<const double> xs, int width) {
    for (double x : xs) {
      if (width == 32) {
        u32(std::bit_cast<std::uint32_t>(static_cast<float>(x)));
      } else {
        f64(x);
      }
    }
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> b) : bytes_(std::move(b)) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IntegrityError("checkpoint is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void array(std::span<double> xs, int width) {
    need(xs.size() * static_cast<std::size_t>(width / 8));
    for (double& x : xs) x = width == 32 ? static_cast<double>(std::bit_cast<float>(u32())) : f64();
  }
  std::string string(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::span<const std::uint8_t> slice(std::size_t from, std::size_t to) const {
    return std::span<const std::uint8_t>(bytes_).subspan(from, to - from);
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint32_t h = 2166136261u;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 16777619u;
  }
  return h;
}

std::vector<std::span<double>> blocks_of(ModelParams& p) {
  return {p.entities.data(), p.relations.data(), p.mlp_i.params, p.mlp_d.params, p.mlp_n.params};
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  check_params(c.params);
  if (c.float_width != 32 && c.float_width != 64) throw FormatError("float width must be 32 or 64");
  const ModelParams& p = c.params;
  Writer w;
  for (char ch : kMagic) w.bytes.push_back(static_cast<std::uint8_t>(ch));
  w.u32(kCheckpointVersion);
  const std::size_t header_start = w.bytes.size();
  w.u32(static_cast<std::uint32_t>(c.float_width));
  w.u64(p.dim());
  w.u64(p.entities.rows());
  w.u64(p.relations.rows());
  w.u32(static_cast<std::uint32_t>(p.mlp_i.num_layers()));
  w.u32(static_cast<std::uint32_t>(p.mlp_d.num_layers()));
  w.u32(static_cast<std::uint32_t>(p.mlp_n.num_layers()));
  w.u32(c.optimizer ? 1 : 0);
  w.u32(fnv1a(std::span<const std::uint8_t>(w.bytes).subspan(header_start)));
  w.array(p.entities.data(), c.float_width);
  w.array(p.relations.data(), c.float_width);
  w.array(p.mlp_i.params, c.float_width);
  w.array(p.mlp_d.params, c.float_width);
  w.array(p.mlp_n.params, c.float_width);
  if (c.optimizer) {
    for (const AdamState& s : c.optimizer->blocks) {
      w.u64(s.step);
      w.f64(s.lr);
      w.f64(s.beta1);
      w.f64(s.beta2);
      w.f64(s.eps);
      w.u64(s.m.size());
      w.array(s.m, c.float_width);
      w.array(s.v, c.float_width);
    }
  }
  nlohmann::ordered_json meta = {{"stage", c.meta.stage},
                                 {"epoch", c.meta.epoch},
                                 {"seed", c.meta.seed},
                                 {"leaky_slope", p.mlp_i.slope}};
  if (c.vocab) {
    meta["entities"] = c.vocab->entities.labels();
    meta["relations"] = c.vocab->relations.labels();
  }
  const std::string blob = meta.dump();
  w.u64(blob.size());
  w.bytes.insert(w.bytes.end(), blob.begin(), blob.end());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(w.bytes.data()),
            static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  if (r.remaining() < 4 || r.string(4) != std::string(kMagic, 4)) {
    throw FormatError("not a checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t header_start = r.pos();
  Checkpoint c;
  c.float_width = static_cast<int>(r.u32());
  const std::uint64_t d = r.u64();
  const std::uint64_t n_ent = r.u64();
  const std::uint64_t n_rel = r.u64();
  const std::uint32_t li = r.u32();
  const std::uint32_t ld = r.u32();
  const std::uint32_t ln = r.u32();
  const std::uint32_t has_adam = r.u32();
  const std::size_t header_end = r.pos();
  if (r.u32() != fnv1a(r.slice(header_start, header_end))) {
    throw FormatError("checkpoint header checksum mismatch");
  }
  if ((c.float_width != 32 && c.float_width != 64) || d == 0 || n_rel % 2 != 0 || li == 0 ||
      ld == 0 || ln == 0 || has_adam > 1) {
    throw FormatError("checkpoint header fields out of range");
  }
  const int width = c.float_width;
  const std::size_t fw = static_cast<std::size_t>(width / 8);
  // Guard allocations against the bytes actually present.
  if (r.remaining() / fw / 2 / d < n_ent + n_rel) throw IntegrityError("checkpoint is truncated");

  ModelParams& p = c.params;
  p.entities = EntityTable(n_ent, d);
  p.relations = EntityTable(n_rel, d);
  p.mlp_i.dims = mlp_dims(2 * d, 2 * d, li);
  p.mlp_d.dims = mlp_dims(4 * d, 2 * d, ld);
  p.mlp_n.dims = mlp_dims(4 * d, 2 * d, ln);
  for (Mlp* m : {&p.mlp_i, &p.mlp_d, &p.mlp_n}) {
    const std::size_t count = mlp_param_count(m->dims);
    r.need(count * fw);
    m->params.assign(count, 0.0);
  }
  r.array(p.entities.data(), width);
  r.array(p.relations.data(), width);
  r.array(p.mlp_i.params, width);
  r.array(p.mlp_d.params, width);
  r.array(p.mlp_n.params, width);
  if (has_adam) {
    OptimizerState opt;
    for (AdamState& s : opt.blocks) {
      s.step = r.u64();
      s.lr = r.f64();
      s.beta1 = r.f64();
      s.beta2 = r.f64();
      s.eps = r.f64();
      const std::uint64_t len = r.u64();
      r.need(len * 2 * fw);
      s.m.assign(len, 0.0);
      s.v.assign(len, 0.0);
      r.array(s.m, width);
      r.array(s.v, width);
    }
    c.optimizer = std::move(opt);
  }
  const std::uint64_t blob_len = r.u64();
  const std::string blob = r.string(blob_len);
  if (r.remaining() != 0) throw IntegrityError("trailing bytes after checkpoint metadata");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(blob);
    c.meta.stage = meta.at("stage").get<int>();
    c.meta.epoch = meta.at("epoch").get<std::size_t>();
    c.meta.seed = meta.at("seed").get<std::uint64_t>();
    const double slope = meta.at("leaky_slope").get<double>();
    p.mlp_i.slope = p.mlp_d.slope = p.mlp_n.slope = slope;
    if (meta.contains("entities")) {
      Vocabularies v;
      for (const auto& l : meta.at("entities")) v.entities.add(l.get<std::string>());
      for (const auto& l : meta.at("relations")) v.relations.add(l.get<std::string>());
      if (v.entities.size() != n_ent || 2 * v.relations.size() != n_rel) {
        throw IntegrityError("checkpoint vocabularies do not match the tables");
      }
      c.vocab = std::move(v);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint metadata: ") + e.what());
  }
  return c;
}

// --- curriculum ---------------------------------------------------------------

std::vector<Template> stage_templates(int stage) {
  switch (stage) {
    case 1:
      return {Template::k1p};
    case 2:
      return {Template::k2p, Template::k3p};
    case 3:
      return {Template::k2in};
    default:
      throw StageError("stage must be 1, 2 or 3");
  }
}

GradMask stage_mask(int stage) {
  GradMask m = GradMask::none();
  switch (stage) {
    case 1:
      m.entities = m.relations = true;
      break;
    case 2:
      m.mlp_i = m.mlp_d = true;
      break;
    case 3:
      m.mlp_n = true;
      break;
    default:
      throw StageError("stage must be 1, 2 or 3");
  }
  return m;
}

Checkpoint initial_checkpoint(const Kg& kg, const RunConfig& config) {
  validate_config(config);
  ModelShape shape;
  shape.dim = config.d;
  shape.num_entities = kg.num_entities();
  shape.num_relations = kg.num_relations();
  shape.layers = {config.layers_i, config.layers_d, config.layers_n};
  shape.slope = config.leaky_slope;
  Checkpoint c;
  c.params = init_params(shape, config.seed, config.init_scale);
  c.float_width = config.float_width;
  c.meta.seed = config.seed;
  c.vocab = kg.vocab();
  return c;
}

std::vector<QueryGraph> link_queries(const Kg& kg) {
  std::vector<QueryGraph> out;
  for (EntityId h = 0; h < kg.num_entities(); ++h) {
    for (RelationId r = 0; r < kg.num_relations(); ++r) {
      const auto tails = kg.neighbors(h, r);
      if (tails.empty()) continue;
      const EntityId anchors[] = {h};
      const RelationId rels[] = {r};
      QueryGraph q = instantiate_template(Template::k1p, anchors, rels);
      q.easy = AnswerSet{};
      q.hard = AnswerSet(tails.begin(), tails.end());
      out.push_back(std::move(q));
    }
  }
  return out;
}

nlohmann::ordered_json train_log_json(const TrainLog& log) {
  auto epochs = nlohmann::ordered_json::array();
  for (const EpochLog& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"ce", e.ce},
                      {"ns", e.ns},
                      {"nl", e.nl},
                      {"valid_mrr", e.valid_mrr ? nlohmann::ordered_json(*e.valid_mrr)
                                                : nlohmann::ordered_json(nullptr)}});
  }
  return {{"stage", log.stage},
          {"steps", log.steps},
          {"early_stopped", log.early_stopped},
          {"best_epoch", log.best_epoch ? nlohmann::ordered_json(*log.best_epoch)
                                        : nlohmann::ordered_json(nullptr)},
          {"epochs", epochs}};
}

TrainLog train_stage(Checkpoint& ckpt, std::span<const QueryGraph> data, int stage,
                     const RunConfig& config, std::span<const QueryGraph> valid) {
  const std::vector<Template> tags = stage_templates(stage);
  if (ckpt.meta.stage < stage - 1) {
    throw StageError("stage " + std::to_string(stage) + " needs a checkpoint that completed stage " +
                     std::to_string(stage - 1) + " (found stage " +
                     std::to_string(ckpt.meta.stage) + ")");
  }
  validate_config(config);
  ModelParams& p = ckpt.params;
  check_params(p);
  auto wanted = [&](const QueryGraph& q) {
    return q.tag && std::find(tags.begin(), tags.end(), *q.tag) != tags.end();
  };

  std::vector<PreparedQuery> prepared;
  std::vector<AnswerSet> answers;
  for (const QueryGraph& q : data) {
    if (!wanted(q)) continue;
    if (!q.easy && !q.hard) throw DataError("training query without answer labels");
    AnswerSet a = training_answers(q);
    if (a.empty()) continue;
    validate_query(q, p.entities.rows(), p.relations.rows());
    prepared.push_back(prepare_query(q, p.num_forward_relations()));
    answers.push_back(std::move(a));
  }
  std::vector<BatchItem> items;
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    for (EntityId t : answers[i]) items.push_back({&prepared[i], t});
  }
  if (items.empty()) {
    throw DataError("no training queries for stage " + std::to_string(stage));
  }
  std::vector<QueryGraph> valid_set;
  for (const QueryGraph& q : valid) {
    if (wanted(q)) valid_set.push_back(q);
  }

  LossSpec spec;
  spec.candidates = stage == 2 ? Candidates::InBatchUnion : Candidates::All;
  spec.ns = spec.nl = stage == 3;
  spec.weights = {config.alpha, config.beta};
  const GradMask mask = stage_mask(stage);

  OptimizerState opt;
  std::vector<std::span<double>> blocks = blocks_of(p);
  const std::array<bool, 5> trainable = {mask.entities, mask.relations, mask.mlp_i, mask.mlp_d,
                                         mask.mlp_n};
  for (std::size_t i = 0; i < 5; ++i) {
    if (trainable[i]) opt.blocks[i] = adam_init(blocks[i].size(), config.lr);
  }
  const ModelParams before = p;

  TrainLog log;
  log.stage = stage;
  Rng rng(split_seed(config.seed, 0x5700 + static_cast<std::uint64_t>(stage)));
  std::optional<double> best_mrr;
  std::optional<ModelParams> best_params;
  std::size_t bad_checks = 0;
  std::size_t epochs_run = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(items.begin(), items.end());
    EpochLog el;
    el.epoch = epoch;
    for (std::size_t start = 0; start < items.size(); start += config.batch_size) {
      Batch b;
      b.stage = stage;
      const std::size_t end = std::min(items.size(), start + config.batch_size);
      b.items.assign(items.begin() + static_cast<std::ptrdiff_t>(start),
                     items.begin() + static_cast<std::ptrdiff_t>(end));
      LossResult res = compute_loss(p, b, spec, mask);
      std::array<std::vector<double>*, 5> grads = {&res.grads.entities, &res.grads.relations,
                                                   &res.grads.mlp_i, &res.grads.mlp_d,
                                                   &res.grads.mlp_n};
      double reg = 0.0;
      for (std::size_t i = 0; i < 5; ++i) {
        if (!trainable[i]) continue;
        if (config.l2 > 0.0) {
          for (std::size_t j = 0; j < blocks[i].size(); ++j) {
            reg += 0.5 * config.l2 * blocks[i][j] * blocks[i][j];
            (*grads[i])[j] += config.l2 * blocks[i][j];
          }
        }
        adam_step(blocks[i], *grads[i], opt.blocks[i]);
      }
      const double w = static_cast<double>(end - start) / static_cast<double>(items.size());
      el.loss += w * (res.total + reg);
      el.ce += w * res.ce;
      el.ns += w * res.ns;
      el.nl += w * res.nl;
      ++log.steps;
    }
    epochs_run = epoch + 1;
    if (!valid_set.empty() && (epoch + 1) % config.eval_every == 0) {
      const RankingReport rep = evaluate(p, valid_set);
      if (rep.overall.n > 0) {
        el.valid_mrr = rep.overall.mrr;
        if (!best_mrr || rep.overall.mrr > *best_mrr) {
          best_mrr = rep.overall.mrr;
          best_params = p;
          log.best_epoch = epoch;
          bad_checks = 0;
        } else if (++bad_checks >= config.patience) {
          log.epochs.push_back(el);
          log.early_stopped = true;
          break;
        }
      }
    }
    log.epochs.push_back(el);
  }
  if (best_params) p = std::move(*best_params);

  // Freezing contract: untouched blocks must be bit-identical.
  ModelParams& now = p;
  const std::array<bool, 5> same = {now.entities == before.entities,
                                    now.relations == before.relations,
                                    now.mlp_i == before.mlp_i, now.mlp_d == before.mlp_d,
                                    now.mlp_n == before.mlp_n};
  for (std::size_t i = 0; i < 5; ++i) {
    if (!trainable[i] && !same[i]) throw StageError("a frozen parameter block was modified");
  }

  ckpt.meta.stage = std::max(ckpt.meta.stage, stage);
  ckpt.meta.epoch = epochs_run;
  ckpt.meta.seed = config.seed;
  ckpt.optimizer = std::move(opt);
  ckpt.float_width = config.float_width;
  return log;
}

}  // namespace lvsa
