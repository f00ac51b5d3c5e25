#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lvsa {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

/// Label suffix that names the inverse of a forward relation in query files.
inline constexpr std::string_view kInverseSuffix = "^-1";

/// Injective label <-> dense id map, ids assigned in first-appearance order.
class Vocab {
 public:
  std::uint32_t add(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const;
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  bool operator==(const Vocab& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Entity vocabulary plus the forward relation vocabulary. Inverse relations
/// are implicit: ids [R, 2R) mirror [0, R).
struct Vocabularies {
  Vocab entities;
  Vocab relations;

  bool operator==(const Vocabularies&) const = default;
};

struct Triple {
  EntityId head = 0;
  RelationId rel = 0;
  EntityId tail = 0;

  auto operator<=>(const Triple&) const = default;
};

/// Immutable, inverse-closed triple store.
class Kg {
 public:
  Kg();
  /// Builds the store from forward triples; every id must be in vocabulary
  /// bounds. Inverse triples are added and duplicates collapse.
  Kg(std::shared_ptr<const Vocabularies> vocab, std::span<const Triple> forward);

  std::size_t num_entities() const { return vocab_->entities.size(); }
  std::size_t num_forward_relations() const { return vocab_->relations.size(); }
  std::size_t num_relations() const { return 2 * vocab_->relations.size(); }

  RelationId inverse(RelationId r) const;
  bool is_inverse(RelationId r) const { return r >= num_forward_relations(); }

  const Vocabularies& vocab() const { return *vocab_; }
  const std::shared_ptr<const Vocabularies>& shared_vocab() const { return vocab_; }

  /// All triples (forward and inverse), sorted by (head, rel, tail).
  std::span<const Triple> triples() const { return triples_; }
  std::vector<Triple> forward_triples() const;

  /// Sorted tails of (head, rel). Throws BoundsError on out-of-range ids.
  std::span<const EntityId> neighbors(EntityId head, RelationId rel) const;
  bool contains(EntityId head, RelationId rel, EntityId tail) const;
  /// Number of outgoing triples of `head` over all 2R relations.
  std::size_t out_degree(EntityId head) const;
  /// Triples with the given head, sorted by (rel, tail).
  std::span<const Triple> out_edges(EntityId head) const;

  /// Label of a relation id; inverse ids carry kInverseSuffix.
  std::string relation_label(RelationId r) const;
  /// Resolves a relation label, accepting the inverse suffix.
  std::optional<RelationId> find_relation(std::string_view label) const;
  const std::string& entity_label(EntityId e) const { return vocab_->entities.label(e); }
  std::optional<EntityId> find_entity(std::string_view label) const {
    return vocab_->entities.find(label);
  }

 private:
  void check_entity(EntityId e) const;
  void check_relation(RelationId r) const;

  std::shared_ptr<const Vocabularies> vocab_;
  std::vector<Triple> triples_;
  std::vector<EntityId> tails_;  // parallel to triples_
  std::vector<std::size_t> head_offsets_;
};

/// Train, train+valid and train+valid+test graphs over one shared vocabulary.
struct SplitGraphs {
  Kg train;
  Kg train_valid;
  Kg full;
};

using LabeledTriple = std::array<std::string, 3>;

/// Reads "head<TAB>relation<TAB>tail" lines. Empty lines are skipped.
std::vector<LabeledTriple> read_labeled_triples(const std::filesystem::path& path);

/// Loads one triples file. Without `vocab` the vocabularies are built in
/// first-appearance order; with it every label must resolve.
Kg load_triples(const std::filesystem::path& path,
                std::shared_ptr<const Vocabularies> vocab = nullptr);

/// Composes nested split graphs. Empty valid/test paths mean empty splits.
SplitGraphs compose_splits(const std::filesystem::path& train_path,
                           const std::filesystem::path& valid_path,
                           const std::filesystem::path& test_path);

/// Same composition from in-memory forward triples.
SplitGraphs compose_splits(std::shared_ptr<const Vocabularies> vocab,
                           std::span<const Triple> train, std::span<const Triple> valid,
                           std::span<const Triple> test);

/// Writes the forward triples of `kg` as TSV (sorted).
void write_triples(const Kg& kg, const std::filesystem::path& path);
void write_triples(const Vocabularies& vocab, std::span<const Triple> forward,
                   const std::filesystem::path& path);
void write_vocab(const Vocab& vocab, const std::filesystem::path& path);
Vocab read_vocab(const std::filesystem::path& path);

/// KG directory layout: entities.tsv, relations.tsv, train.tsv, valid.tsv, test.tsv.
void write_kg_dir(const SplitGraphs& splits, const std::filesystem::path& dir);
SplitGraphs load_kg_dir(const std::filesystem::path& dir);

}  // namespace lvsa
