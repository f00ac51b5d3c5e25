#include "lvsa/nn.hpp"

#include <cmath>

#include "lvsa/error.hpp"
#include "lvsa/random.hpp"

namespace lvsa {

std::size_t mlp_param_count(std::span<const std::size_t> dims) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) n += dims[l + 1] * (dims[l] + 1);
  return n;
}

std::size_t Mlp::weight_offset(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t l = 0; l < layer; ++l) off += dims[l + 1] * (dims[l] + 1);
  return off;
}

std::size_t Mlp::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + dims[layer + 1] * dims[layer];
}

Mlp mlp_init(std::span<const std::size_t> dims, std::uint64_t seed, double slope) {
  if (dims.size() < 2) throw DimensionError("mlp_init: need at least two layer widths");
  for (std::size_t w : dims) {
    if (w == 0) throw DimensionError("mlp_init: zero layer width");
  }
  Mlp m;
  m.dims.assign(dims.begin(), dims.end());
  m.slope = slope;
  m.params.assign(mlp_param_count(dims), 0.0);
  Rng rng(seed);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.dims[l]));
    const std::size_t w = m.weight_offset(l);
    for (std::size_t i = 0; i < m.dims[l + 1] * m.dims[l]; ++i) {
      m.params[w + i] = rng.uniform(-bound, bound);
    }
  }
  return m;
}

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

std::vector<double> forward(const Mlp& m, std::span<const double> x, MlpCache* cache) {
  if (m.num_layers() == 0 || x.size() != m.input_dim()) {
    throw DimensionError("mlp forward: input length " + std::to_string(x.size()) +
                         ", expected " + std::to_string(m.num_layers() ? m.input_dim() : 0));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  std::vector<double> act(x.begin(), x.end());
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const std::size_t in = m.dims[l];
    const std::size_t out = m.dims[l + 1];
    const double* w = m.params.data() + m.weight_offset(l);
    const double* b = m.params.data() + m.bias_offset(l);
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += row[i] * act[i];
      z[o] = s;
    }
    if (cache) {
      cache->inputs.push_back(act);
      cache->pre.push_back(z);
    }
    if (l + 1 < m.num_layers()) {
      for (double& v : z) v = leaky_relu(v, m.slope);
    }
    act = std::move(z);
  }
  return act;
}

std::vector<double> backward(const Mlp& m, const MlpCache& cache,
                             std::span<const double> upstream, std::span<double> param_grad) {
  if (upstream.size() != m.output_dim()) throw DimensionError("mlp backward: upstream length");
  const bool accumulate = !param_grad.empty();
  if (accumulate && param_grad.size() != m.params.size()) {
    throw DimensionError("mlp backward: grad buffer");
  }
  if (cache.inputs.size() != m.num_layers()) throw DimensionError("mlp backward: stale cache");
  std::vector<double> dz(upstream.begin(), upstream.end());
  for (std::size_t l = m.num_layers(); l-- > 0;) {
    const std::size_t in = m.dims[l];
    const std::size_t out = m.dims[l + 1];
    const double* w = m.params.data() + m.weight_offset(l);
    double* gw = accumulate ? param_grad.data() + m.weight_offset(l) : nullptr;
    double* gb = accumulate ? param_grad.data() + m.bias_offset(l) : nullptr;
    const std::vector<double>& a = cache.inputs[l];
    std::vector<double> da(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double g = dz[o];
      if (g == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) da[i] += g * row[i];
      if (!accumulate) continue;
      gb[o] += g;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += g * a[i];
    }
    if (l > 0) {
      const std::vector<double>& z = cache.pre[l - 1];
      for (std::size_t i = 0; i < in; ++i) da[i] *= z[i] > 0.0 ? 1.0 : m.slope;
    }
    dz = std::move(da);
  }
  return dz;
}

MlpGrad backward(const Mlp& m, std::span<const double> x, std::span<const double> upstream) {
  MlpCache cache;
  forward(m, x, &cache);
  MlpGrad out;
  out.params.assign(m.params.size(), 0.0);
  out.input = backward(m, cache, upstream, out.params);
  return out;
}

AdamState adam_init(std::size_t size, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.assign(size, 0.0);
  s.v.assign(size, 0.0);
  return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (params.size() != grads.size() || s.m.size() != params.size() ||
      s.v.size() != params.size()) {
    throw DimensionError("adam_step: shape mismatch");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

}  // namespace lvsa
