#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "lvsa/config.hpp"
#include "lvsa/encoder.hpp"
#include "lvsa/kg.hpp"

namespace lvsa {

struct BatchItem {
  const PreparedQuery* query = nullptr;
  EntityId answer = 0;
};

struct Batch {
  std::vector<BatchItem> items;
  int stage = 0;
};

/// Throws DataError on an empty batch or an answer outside easy/hard.
void check_batch(const Batch& b);

enum class Candidates : std::uint8_t { All, InBatchUnion };

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Which terms make up the objective.
struct LossSpec {
  bool ce = true;
  Candidates candidates = Candidates::All;
  bool ns = false;
  bool nl = false;
  LossWeights weights;
};

struct LossResult {
  double total = 0.0;
  double ce = 0.0;
  double ns = 0.0;
  double nl = 0.0;
  ParamGrads grads;
};

/// Value and exact gradient (for masked-in blocks) of the combined objective,
/// every term averaged over the batch items.
LossResult compute_loss(const ModelParams& p, const Batch& b, const LossSpec& spec,
                        GradMask mask = GradMask::all());

LossResult loss_ce(const ModelParams& p, const Batch& b, Candidates candidates,
                   GradMask mask = GradMask::all());
LossResult loss_ns(const ModelParams& p, const Batch& b, double alpha,
                   GradMask mask = GradMask::all());
LossResult loss_nl(const ModelParams& p, const Batch& b, double beta,
                   GradMask mask = GradMask::all());

/// Adam state per parameter block (entities, relations, mlp_i, mlp_d, mlp_n);
/// blocks never trained keep empty moment vectors.
struct OptimizerState {
  std::array<AdamState, 5> blocks;

  bool operator==(const OptimizerState&) const = default;
};

struct CheckpointMeta {
  int stage = 0;  // last completed stage
  std::size_t epoch = 0;
  std::uint64_t seed = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  ModelParams params;
  int float_width = 64;
  CheckpointMeta meta;
  std::optional<OptimizerState> optimizer;
  std::optional<Vocabularies> vocab;  // labels, so queries parse without the graph

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
/// FormatError on a bad magic, version or header; IntegrityError on truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Template tags a curriculum stage trains on.
std::vector<Template> stage_templates(int stage);
/// Blocks a curriculum stage updates.
GradMask stage_mask(int stage);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double ce = 0.0;
  double ns = 0.0;
  double nl = 0.0;
  std::optional<double> valid_mrr;
};

struct TrainLog {
  int stage = 0;
  std::size_t steps = 0;
  bool early_stopped = false;
  std::optional<std::size_t> best_epoch;
  std::vector<EpochLog> epochs;
};

nlohmann::ordered_json train_log_json(const TrainLog& log);

/// Runs one curriculum stage on the queries whose tag belongs to it. Every
/// answer in easy and hard becomes a training item. With validation queries,
/// validation MRR is checked every eval_every epochs, training stops after
/// `patience` checks without improvement and the best parameters are kept.
/// StageError unless the checkpoint completed stage - 1 (or later).
TrainLog train_stage(Checkpoint& ckpt, std::span<const QueryGraph> data, int stage,
                     const RunConfig& config, std::span<const QueryGraph> valid = {});

/// Seeded initial checkpoint for a graph (stage 0).
Checkpoint initial_checkpoint(const Kg& kg, const RunConfig& config);

/// One 1p query per (head, relation) pair of `kg` with every tail as a hard
/// answer; inverse relations included.
std::vector<QueryGraph> link_queries(const Kg& kg);

}  // namespace lvsa
