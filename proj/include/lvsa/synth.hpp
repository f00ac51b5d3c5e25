#pragma once

#include <cstdint>

#include "lvsa/kg.hpp"

namespace lvsa {

struct SynthSpec {
  std::size_t entities = 100;
  std::size_t relations = 8;
  std::size_t degree = 4;  // distinct forward out-edges per entity, on average
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  double valid_fraction = 0.1;
};

/// Seeded toy graph. Entities fall into about sqrt(N) clusters; every
/// relation maps each cluster to one target cluster, and tails are drawn
/// inside it, so held-out edges follow the same regularities as training
/// edges. Labels are "e<i>" and "r<j>". Triples are shuffled and split.
SplitGraphs generate_kg(const SynthSpec& spec);

}  // namespace lvsa
