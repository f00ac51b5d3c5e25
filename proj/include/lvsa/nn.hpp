#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lvsa {

inline constexpr double kDefaultLeakySlope = 0.01;

/// Feedforward net: affine layers with LeakyReLU between them and a linear
/// final layer. Parameters live in one flat buffer, layer by layer, each as a
/// row-major (out x in) weight matrix followed by the bias.
struct Mlp {
  std::vector<std::size_t> dims;
  double slope = kDefaultLeakySlope;
  std::vector<double> params;

  std::size_t num_layers() const { return dims.empty() ? 0 : dims.size() - 1; }
  std::size_t input_dim() const { return dims.front(); }
  std::size_t output_dim() const { return dims.back(); }
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;

  bool operator==(const Mlp&) const = default;
};

std::size_t mlp_param_count(std::span<const std::size_t> dims);

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
Mlp mlp_init(std::span<const std::size_t> dims, std::uint64_t seed,
             double slope = kDefaultLeakySlope);

/// Layer inputs and pre-activations recorded by a forward pass.
struct MlpCache {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> pre;
};

std::vector<double> forward(const Mlp& m, std::span<const double> x, MlpCache* cache = nullptr);

double leaky_relu(double x, double slope);

struct MlpGrad {
  std::vector<double> input;
  std::vector<double> params;
};

/// Exact gradients of <upstream, forward(m, x)> w.r.t. x and the parameters.
MlpGrad backward(const Mlp& m, std::span<const double> x, std::span<const double> upstream);

/// Same, reusing a forward cache; parameter gradients are added into
/// `param_grad` (skipped when it is empty) and the input gradient is returned.
std::vector<double> backward(const Mlp& m, const MlpCache& cache,
                             std::span<const double> upstream, std::span<double> param_grad);

struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;

  bool operator==(const AdamState&) const = default;
};

AdamState adam_init(std::size_t size, double lr);

/// One bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

}  // namespace lvsa
