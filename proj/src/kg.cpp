#include "lvsa/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lvsa/error.hpp"

namespace lvsa {

std::uint32_t Vocab::add(std::string_view label) {
  std::string key(label);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<std::uint32_t> Vocab::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::label(std::uint32_t id) const {
  if (id >= labels_.size()) {
    throw BoundsError("vocabulary id " + std::to_string(id) + " out of range (size " +
                      std::to_string(labels_.size()) + ")");
  }
  return labels_[id];
}

Kg::Kg() : vocab_(std::make_shared<Vocabularies>()), head_offsets_(1, 0) {}

Kg::Kg(std::shared_ptr<const Vocabularies> vocab, std::span<const Triple> forward)
    : vocab_(std::move(vocab)) {
  const auto num_rel = static_cast<RelationId>(num_forward_relations());
  triples_.reserve(2 * forward.size());
  for (const Triple& t : forward) {
    check_entity(t.head);
    check_entity(t.tail);
    if (t.rel >= num_rel) {
      throw BoundsError("forward relation id " + std::to_string(t.rel) + " out of range");
    }
    triples_.push_back(t);
    triples_.push_back({t.tail, t.rel + num_rel, t.head});
  }
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());

  tails_.reserve(triples_.size());
  head_offsets_.assign(num_entities() + 1, 0);
  for (const Triple& t : triples_) {
    tails_.push_back(t.tail);
    ++head_offsets_[t.head + 1];
  }
  for (std::size_t i = 1; i < head_offsets_.size(); ++i) {
    head_offsets_[i] += head_offsets_[i - 1];
  }
}

void Kg::check_entity(EntityId e) const {
  if (e >= num_entities()) {
    throw BoundsError("entity id " + std::to_string(e) + " out of range (|V| = " +
                      std::to_string(num_entities()) + ")");
  }
}

void Kg::check_relation(RelationId r) const {
  if (r >= num_relations()) {
    throw BoundsError("relation id " + std::to_string(r) + " out of range (2R = " +
                      std::to_string(num_relations()) + ")");
  }
}

RelationId Kg::inverse(RelationId r) const {
  check_relation(r);
  const auto n = static_cast<RelationId>(num_forward_relations());
  return (r + n) % (2 * n);
}

std::vector<Triple> Kg::forward_triples() const {
  std::vector<Triple> out;
  out.reserve(triples_.size() / 2);
  for (const Triple& t : triples_) {
    if (!is_inverse(t.rel)) out.push_back(t);
  }
  return out;
}

std::span<const Triple> Kg::out_edges(EntityId head) const {
  check_entity(head);
  return std::span<const Triple>(triples_).subspan(
      head_offsets_[head], head_offsets_[head + 1] - head_offsets_[head]);
}

std::size_t Kg::out_degree(EntityId head) const { return out_edges(head).size(); }

std::span<const EntityId> Kg::neighbors(EntityId head, RelationId rel) const {
  check_relation(rel);
  auto edges = out_edges(head);
  auto lo = std::lower_bound(edges.begin(), edges.end(), rel,
                             [](const Triple& t, RelationId r) { return t.rel < r; });
  auto hi = std::upper_bound(lo, edges.end(), rel,
                             [](RelationId r, const Triple& t) { return r < t.rel; });
  const auto first = static_cast<std::size_t>(&*edges.begin() - triples_.data()) +
                     static_cast<std::size_t>(lo - edges.begin());
  if (lo == hi) return {};
  return std::span<const EntityId>(tails_).subspan(first, static_cast<std::size_t>(hi - lo));
}

bool Kg::contains(EntityId head, RelationId rel, EntityId tail) const {
  auto tails = neighbors(head, rel);
  return std::binary_search(tails.begin(), tails.end(), tail);
}

std::string Kg::relation_label(RelationId r) const {
  check_relation(r);
  if (is_inverse(r)) {
    return vocab_->relations.label(r - static_cast<RelationId>(num_forward_relations())) +
           std::string(kInverseSuffix);
  }
  return vocab_->relations.label(r);
}

std::optional<RelationId> Kg::find_relation(std::string_view label) const {
  if (auto id = vocab_->relations.find(label)) return *id;
  if (label.size() > kInverseSuffix.size() && label.ends_with(kInverseSuffix)) {
    auto base = label.substr(0, label.size() - kInverseSuffix.size());
    if (auto id = vocab_->relations.find(base)) {
      return *id + static_cast<RelationId>(num_forward_relations());
    }
  }
  return std::nullopt;
}

std::vector<LabeledTriple> read_labeled_triples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open triples file " + path.string());
  std::vector<LabeledTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    LabeledTriple t;
    std::size_t col = 0;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      if (col == 3) {
        col = 4;
        break;
      }
      t[col++] = line.substr(start, tab == std::string::npos ? std::string::npos : tab - start);
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (col != 3) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 3 tab-separated columns");
    }
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

std::vector<Triple> resolve(const std::vector<LabeledTriple>& rows, const Vocabularies& vocab,
                            const std::filesystem::path& path) {
  std::vector<Triple> out;
  out.reserve(rows.size());
  for (const auto& [h, r, t] : rows) {
    auto hid = vocab.entities.find(h);
    auto rid = vocab.relations.find(r);
    auto tid = vocab.entities.find(t);
    if (!hid || !rid || !tid) {
      const std::string& bad = !hid ? h : (!rid ? r : t);
      throw VocabError(path.string() + ": unknown label '" + bad + "'");
    }
    out.push_back({*hid, *rid, *tid});
  }
  return out;
}

void extend_vocab(Vocabularies& vocab, const std::vector<LabeledTriple>& rows) {
  for (const auto& [h, r, t] : rows) {
    vocab.entities.add(h);
    vocab.relations.add(r);
    vocab.entities.add(t);
  }
}

std::vector<LabeledTriple> read_optional(const std::filesystem::path& path) {
  if (path.empty()) return {};
  return read_labeled_triples(path);
}

}  // namespace

Kg load_triples(const std::filesystem::path& path, std::shared_ptr<const Vocabularies> vocab) {
  auto rows = read_labeled_triples(path);
  if (!vocab) {
    auto built = std::make_shared<Vocabularies>();
    extend_vocab(*built, rows);
    vocab = std::move(built);
  }
  auto triples = resolve(rows, *vocab, path);
  return Kg(std::move(vocab), triples);
}

SplitGraphs compose_splits(const std::filesystem::path& train_path,
                           const std::filesystem::path& valid_path,
                           const std::filesystem::path& test_path) {
  auto train_rows = read_labeled_triples(train_path);
  auto valid_rows = read_optional(valid_path);
  auto test_rows = read_optional(test_path);
  auto vocab = std::make_shared<Vocabularies>();
  extend_vocab(*vocab, train_rows);
  extend_vocab(*vocab, valid_rows);
  extend_vocab(*vocab, test_rows);
  auto train = resolve(train_rows, *vocab, train_path);
  auto valid = resolve(valid_rows, *vocab, valid_path);
  auto test = resolve(test_rows, *vocab, test_path);
  return compose_splits(vocab, train, valid, test);
}

SplitGraphs compose_splits(std::shared_ptr<const Vocabularies> vocab,
                           std::span<const Triple> train, std::span<const Triple> valid,
                           std::span<const Triple> test) {
  std::vector<Triple> acc(train.begin(), train.end());
  Kg train_kg(vocab, acc);
  acc.insert(acc.end(), valid.begin(), valid.end());
  Kg train_valid_kg(vocab, acc);
  acc.insert(acc.end(), test.begin(), test.end());
  Kg full_kg(vocab, acc);
  return {std::move(train_kg), std::move(train_valid_kg), std::move(full_kg)};
}

void write_triples(const Vocabularies& vocab, std::span<const Triple> forward,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const Triple& t : forward) {
    out << vocab.entities.label(t.head) << '\t' << vocab.relations.label(t.rel) << '\t'
        << vocab.entities.label(t.tail) << '\n';
  }
}

void write_triples(const Kg& kg, const std::filesystem::path& path) {
  write_triples(kg.vocab(), kg.forward_triples(), path);
}

void write_vocab(const Vocab& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t i = 0; i < vocab.size(); ++i) out << vocab.labels()[i] << '\t' << i << '\n';
}

Vocab read_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open vocabulary file " + path.string());
  Vocab vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected label<TAB>id");
    }
    const std::string label = line.substr(0, tab);
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad id");
    }
    if (id != vocab.size() || vocab.find(label)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": ids must be dense, ordered and labels unique");
    }
    vocab.add(label);
  }
  return vocab;
}

void write_kg_dir(const SplitGraphs& splits, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& vocab = splits.full.vocab();
  write_vocab(vocab.entities, dir / "entities.tsv");
  write_vocab(vocab.relations, dir / "relations.tsv");

  auto train = splits.train.forward_triples();
  auto train_valid = splits.train_valid.forward_triples();
  auto full = splits.full.forward_triples();
  std::vector<Triple> valid;
  std::vector<Triple> test;
  std::set_difference(train_valid.begin(), train_valid.end(), train.begin(), train.end(),
                      std::back_inserter(valid));
  std::set_difference(full.begin(), full.end(), train_valid.begin(), train_valid.end(),
                      std::back_inserter(test));
  write_triples(vocab, train, dir / "train.tsv");
  write_triples(vocab, valid, dir / "valid.tsv");
  write_triples(vocab, test, dir / "test.tsv");
}

SplitGraphs load_kg_dir(const std::filesystem::path& dir) {
  auto vocab = std::make_shared<Vocabularies>();
  vocab->entities = read_vocab(dir / "entities.tsv");
  vocab->relations = read_vocab(dir / "relations.tsv");
  auto load = [&](const char* name) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) return std::vector<Triple>{};
    return resolve(read_labeled_triples(path), *vocab, path);
  };
  auto train = load("train.tsv");
  auto valid = load("valid.tsv");
  auto test = load("test.tsv");
  return compose_splits(vocab, train, valid, test);
}

}  // namespace lvsa
