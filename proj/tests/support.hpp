#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>
#include <array>

#include <unistd.h>

#include "lvsa/kg.hpp"
#include "lvsa/query.hpp"
#include "lvsa/random.hpp"

namespace testsupport {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("lvsa_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path operator/(const std::string& f) const { return path / f; }
};

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string tsv(std::initializer_list<std::array<const char*, 3>> rows) {
  std::string s;
  for (const auto& r : rows) s += std::string(r[0]) + "\t" + r[1] + "\t" + r[2] + "\n";
  return s;
}

inline lvsa::Kg kg_from(const std::string& text) {
  TempDir dir("kg");
  write_file(dir / "t.tsv", text);
  return lvsa::load_triples(dir / "t.tsv");
}

// Random graph over a fixed vocabulary, every split equal.
inline lvsa::SplitGraphs random_graph(std::size_t n, std::size_t relations, std::size_t edges,
                                      std::uint64_t seed) {
  auto vocab = std::make_shared<lvsa::Vocabularies>();
  for (std::size_t i = 0; i < n; ++i) vocab->entities.add("e" + std::to_string(i));
  for (std::size_t r = 0; r < relations; ++r) vocab->relations.add("r" + std::to_string(r));
  lvsa::Rng rng(seed);
  std::vector<lvsa::Triple> ts;
  for (std::size_t i = 0; i < edges; ++i) {
    ts.push_back({static_cast<lvsa::EntityId>(rng.index(n)),
                  static_cast<lvsa::RelationId>(rng.index(relations)),
                  static_cast<lvsa::EntityId>(rng.index(n))});
  }
  return lvsa::compose_splits(vocab, ts, {}, {});
}

}  // namespace testsupport
