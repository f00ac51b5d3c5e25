#include "lvsa/vsa.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lvsa/error.hpp"

namespace lvsa {

namespace {

void require_same_dim(ComplexView a, ComplexView b, const char* op) {
  if (a.re.size() != b.re.size() || a.im.size() != a.re.size() || b.im.size() != b.re.size()) {
    throw DimensionError(std::string(op) + ": dimension mismatch (" +
                         std::to_string(a.re.size()) + " vs " + std::to_string(b.re.size()) + ")");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

bool lex_less(ComplexView a, ComplexView b) {
  const auto c = std::lexicographical_compare_three_way(a.re.begin(), a.re.end(), b.re.begin(),
                                                        b.re.end());
  if (c != 0) return c < 0;
  return std::lexicographical_compare(a.im.begin(), a.im.end(), b.im.begin(), b.im.end());
}

}  // namespace

ComplexVec::ComplexVec(std::vector<double> r, std::vector<double> i)
    : re(std::move(r)), im(std::move(i)) {
  if (re.size() != im.size()) throw DimensionError("ComplexVec: re/im length mismatch");
}

ComplexVec ComplexView::to_vec() const {
  return {std::vector<double>(re.begin(), re.end()), std::vector<double>(im.begin(), im.end())};
}

EntityTable::EntityTable(std::size_t rows, std::size_t dim)
    : rows_(rows), dim_(dim), data_(rows * 2 * dim, 0.0) {}

ComplexView EntityTable::row(std::size_t i) const {
  if (i >= rows_) throw BoundsError("table row " + std::to_string(i) + " out of range");
  const double* base = data_.data() + i * 2 * dim_;
  return {std::span<const double>(base, dim_), std::span<const double>(base + dim_, dim_)};
}

std::span<double> EntityTable::row_re(std::size_t i) {
  if (i >= rows_) throw BoundsError("table row " + std::to_string(i) + " out of range");
  return {data_.data() + i * 2 * dim_, dim_};
}

std::span<double> EntityTable::row_im(std::size_t i) {
  if (i >= rows_) throw BoundsError("table row " + std::to_string(i) + " out of range");
  return {data_.data() + i * 2 * dim_ + dim_, dim_};
}

ComplexVec bind(ComplexView a, ComplexView b) {
  require_same_dim(a, b, "bind");
  const std::size_t d = a.dim();
  ComplexVec out = ComplexVec::zeros(d);
  for (std::size_t k = 0; k < d; ++k) {
    out.re[k] = a.re[k] * b.re[k] - a.im[k] * b.im[k];
    out.im[k] = a.re[k] * b.im[k] + a.im[k] * b.re[k];
  }
  return out;
}

ComplexVec conjugate(ComplexView a) {
  ComplexVec out = a.to_vec();
  for (double& x : out.im) x = -x;
  return out;
}

double mean_abs(ComplexView v) {
  double s = 0.0;
  for (double x : v.re) s += std::abs(x);
  for (double x : v.im) s += std::abs(x);
  return s / static_cast<double>(2 * v.dim());
}

ComplexVec norm_add(std::span<const ComplexView> inputs) {
  if (inputs.empty()) throw ArityError("norm_add: empty input list");
  const std::size_t d = inputs.front().dim();
  for (const ComplexView& v : inputs) require_same_dim(inputs.front(), v, "norm_add");

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return lex_less(inputs[i], inputs[j]); });

  const auto n = static_cast<double>(inputs.size());
  ComplexVec mean = ComplexVec::zeros(d);
  double target = 0.0;
  for (std::size_t idx : order) {
    const ComplexView& v = inputs[idx];
    for (std::size_t k = 0; k < d; ++k) {
      mean.re[k] += v.re[k];
      mean.im[k] += v.im[k];
    }
    target += mean_abs(v);
  }
  for (std::size_t k = 0; k < d; ++k) {
    mean.re[k] /= n;
    mean.im[k] /= n;
  }
  target /= n;
  const double current = mean_abs(mean);
  if (current <= kNormAddEps) return ComplexVec::zeros(d);
  const double scale = target / current;
  for (std::size_t k = 0; k < d; ++k) {
    mean.re[k] *= scale;
    mean.im[k] *= scale;
  }
  return mean;
}

ComplexVec norm_add(std::span<const ComplexVec> inputs) {
  std::vector<ComplexView> views(inputs.begin(), inputs.end());
  return norm_add(std::span<const ComplexView>(views));
}

double herm_score(ComplexView q, ComplexView e) {
  require_same_dim(q, e, "herm_score");
  return dot(q.re, e.re) + dot(q.im, e.im);
}

void score_all(ComplexView q, const EntityTable& table, std::span<double> out) {
  if (q.dim() != table.dim() || q.im.size() != q.re.size()) {
    throw DimensionError("score_all: query dimension " + std::to_string(q.dim()) +
                         " vs table dimension " + std::to_string(table.dim()));
  }
  if (out.size() != table.rows()) throw DimensionError("score_all: output size mismatch");
  const std::size_t d = table.dim();
  const double* row = table.data().data();
  for (std::size_t i = 0; i < table.rows(); ++i, row += 2 * d) {
    out[i] = dot(q.re, {row, d}) + dot(q.im, {row + d, d});
  }
}

std::vector<double> score_all(ComplexView q, const EntityTable& table) {
  std::vector<double> out(table.rows());
  score_all(q, table, out);
  return out;
}

std::vector<double> stack(ComplexView v) {
  std::vector<double> out;
  out.reserve(2 * v.dim());
  out.insert(out.end(), v.re.begin(), v.re.end());
  out.insert(out.end(), v.im.begin(), v.im.end());
  return out;
}

ComplexVec split(std::span<const double> stacked) {
  if (stacked.size() % 2 != 0) throw DimensionError("split: odd stacked length");
  const std::size_t d = stacked.size() / 2;
  return {std::vector<double>(stacked.begin(), stacked.begin() + static_cast<std::ptrdiff_t>(d)),
          std::vector<double>(stacked.begin() + static_cast<std::ptrdiff_t>(d), stacked.end())};
}

std::vector<double> concat_stacked(ComplexView a, ComplexView b) {
  std::vector<double> out = stack(a);
  const auto tail = stack(b);
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

BindGrad bind_backward(ComplexView a, ComplexView b, ComplexView g) {
  require_same_dim(a, b, "bind_backward");
  require_same_dim(a, g, "bind_backward");
  const std::size_t d = a.dim();
  BindGrad out{ComplexVec::zeros(d), ComplexVec::zeros(d)};
  for (std::size_t k = 0; k < d; ++k) {
    out.a.re[k] = g.re[k] * b.re[k] + g.im[k] * b.im[k];
    out.a.im[k] = -g.re[k] * b.im[k] + g.im[k] * b.re[k];
    out.b.re[k] = g.re[k] * a.re[k] + g.im[k] * a.im[k];
    out.b.im[k] = -g.re[k] * a.im[k] + g.im[k] * a.re[k];
  }
  return out;
}

std::vector<ComplexVec> norm_add_backward(std::span<const ComplexView> inputs, ComplexView g) {
  if (inputs.empty()) throw ArityError("norm_add_backward: empty input list");
  const std::size_t d = inputs.front().dim();
  const auto n = static_cast<double>(inputs.size());
  const auto two_d = static_cast<double>(2 * d);

  // Recompute forward quantities: mean m, target L, current Lbar.
  ComplexVec mean = ComplexVec::zeros(d);
  double target = 0.0;
  for (const ComplexView& v : inputs) {
    require_same_dim(inputs.front(), v, "norm_add_backward");
    for (std::size_t k = 0; k < d; ++k) {
      mean.re[k] += v.re[k];
      mean.im[k] += v.im[k];
    }
    target += mean_abs(v);
  }
  for (std::size_t k = 0; k < d; ++k) {
    mean.re[k] /= n;
    mean.im[k] /= n;
  }
  target /= n;
  const double current = mean_abs(mean);

  std::vector<ComplexVec> grads(inputs.size(), ComplexVec::zeros(d));
  if (current <= kNormAddEps) return grads;

  // out = (L / Lbar) * m
  const double scale = target / current;
  const double g_dot_m = dot(g.re, mean.re) + dot(g.im, mean.im);
  const double d_target = g_dot_m / current;
  const double d_current = -g_dot_m * target / (current * current);

  ComplexVec d_mean = ComplexVec::zeros(d);
  for (std::size_t k = 0; k < d; ++k) {
    d_mean.re[k] = scale * g.re[k] + d_current * sign(mean.re[k]) / two_d;
    d_mean.im[k] = scale * g.im[k] + d_current * sign(mean.im[k]) / two_d;
  }
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    const ComplexView& v = inputs[j];
    for (std::size_t k = 0; k < d; ++k) {
      grads[j].re[k] = d_mean.re[k] / n + d_target * sign(v.re[k]) / (two_d * n);
      grads[j].im[k] = d_mean.im[k] / n + d_target * sign(v.im[k]) / (two_d * n);
    }
  }
  return grads;
}

void axpy(ComplexVec& dst, ComplexView src, double scale) {
  require_same_dim(dst, src, "axpy");
  for (std::size_t k = 0; k < dst.dim(); ++k) {
    dst.re[k] += scale * src.re[k];
    dst.im[k] += scale * src.im[k];
  }
}

}  // namespace lvsa
