#include "lvsa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "lvsa/error.hpp"
#include "lvsa/random.hpp"

namespace lvsa {

SplitGraphs generate_kg(const SynthSpec& spec) {
  if (spec.entities == 0 || spec.relations == 0) {
    throw DataError("generator needs at least one entity and one relation");
  }
  if (spec.train_fraction <= 0.0 || spec.valid_fraction < 0.0 ||
      spec.train_fraction + spec.valid_fraction > 1.0) {
    throw DataError("invalid split fractions");
  }
  const std::size_t n = spec.entities;
  const std::size_t target = n * spec.degree;
  if (target > n * n * spec.relations) throw DataError("degree too large for the vocabulary");

  auto vocab = std::make_shared<Vocabularies>();
  for (std::size_t i = 0; i < n; ++i) vocab->entities.add("e" + std::to_string(i));
  for (std::size_t r = 0; r < spec.relations; ++r) vocab->relations.add("r" + std::to_string(r));

  Rng rng(split_seed(spec.seed, 0));
  const std::size_t clusters =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(double(n)))));
  std::vector<std::vector<EntityId>> members(clusters);
  for (std::size_t e = 0; e < n; ++e) members[e % clusters].push_back(static_cast<EntityId>(e));
  std::vector<std::vector<std::size_t>> maps(spec.relations, std::vector<std::size_t>(clusters));
  for (auto& m : maps) {
    for (auto& c : m) c = rng.index(clusters);
  }

  std::set<Triple> seen;
  std::vector<Triple> triples;
  const std::size_t max_attempts = 50 * target + 1000;
  for (std::size_t attempt = 0; triples.size() < target && attempt < max_attempts; ++attempt) {
    // Round-robin heads keep out-degrees even.
    const auto h = static_cast<EntityId>(attempt % n);
    const auto r = static_cast<RelationId>(rng.index(spec.relations));
    const auto& pool = members[maps[r][h % clusters]];
    const EntityId t = pool[rng.index(pool.size())];
    const Triple tr{h, r, t};
    if (seen.insert(tr).second) triples.push_back(tr);
  }

  rng.shuffle(triples.begin(), triples.end());
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * triples.size()));
  const auto n_valid = static_cast<std::size_t>(std::llround(spec.valid_fraction * triples.size()));
  const std::span<const Triple> all(triples);
  return compose_splits(vocab, all.subspan(0, n_train), all.subspan(n_train, n_valid),
                        all.subspan(std::min(all.size(), n_train + n_valid)));
}

}  // namespace lvsa
