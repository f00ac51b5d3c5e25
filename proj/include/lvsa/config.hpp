#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace lvsa {

/// Run configuration shared by every subcommand. Read from a flat
/// "key = value" file; '#' starts a comment. Unknown keys are rejected.
struct RunConfig {
  std::size_t d = 1000;
  std::uint64_t seed = 0;
  double lr = 5e-4;
  std::size_t batch_size = 512;
  double alpha = 1.0;
  double beta = 1.0;
  std::size_t epochs = 100;
  int float_width = 64;
  double leaky_slope = 0.01;
  double l2 = 0.0;
  double init_scale = 0.0;  // 0 selects 1/sqrt(d)
  std::size_t layers_i = 2;
  std::size_t layers_d = 3;
  std::size_t layers_n = 2;
  std::size_t patience = 10;
  std::size_t eval_every = 1;
  std::size_t threads = 1;
  bool relation_prediction = false;  // reserved; enabling it is an error

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
/// Throws ConfigError on out-of-range values.
void validate_config(const RunConfig& c);
std::string format_config(const RunConfig& c);

}  // namespace lvsa
