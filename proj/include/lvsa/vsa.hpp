#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lvsa {

/// d-dimensional complex vector stored as separate real and imaginary arrays.
struct ComplexVec {
  std::vector<double> re;
  std::vector<double> im;

  ComplexVec() = default;
  ComplexVec(std::vector<double> r, std::vector<double> i);

  static ComplexVec zeros(std::size_t d) { return {std::vector<double>(d), std::vector<double>(d)}; }
  /// All components 1 + 0i: the binding identity.
  static ComplexVec ones(std::size_t d) {
    return {std::vector<double>(d, 1.0), std::vector<double>(d, 0.0)};
  }

  std::size_t dim() const { return re.size(); }
  bool operator==(const ComplexVec&) const = default;
};

/// Non-owning view of a complex vector (a ComplexVec or a table row).
struct ComplexView {
  std::span<const double> re;
  std::span<const double> im;

  ComplexView() = default;
  ComplexView(std::span<const double> r, std::span<const double> i) : re(r), im(i) {}
  ComplexView(const ComplexVec& v) : re(v.re), im(v.im) {}  // NOLINT: implicit by design

  std::size_t dim() const { return re.size(); }
  ComplexVec to_vec() const;
};

/// Row-major table of complex vectors; each row is laid out as [re | im].
class EntityTable {
 public:
  EntityTable() = default;
  EntityTable(std::size_t rows, std::size_t dim);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  ComplexView row(std::size_t i) const;
  std::span<double> row_re(std::size_t i);
  std::span<double> row_im(std::size_t i);

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const EntityTable&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Guard on the mean-vector norm inside norm_add.
inline constexpr double kNormAddEps = 1e-12;

/// Componentwise complex product.
ComplexVec bind(ComplexView a, ComplexView b);
ComplexVec conjugate(ComplexView a);
/// Magnitude-preserving bundling: mean of the inputs rescaled so its mean
/// absolute component equals the inputs' average mean absolute component.
/// Inputs are summed in a canonical (lexicographic) order, so the result is
/// bitwise invariant to input permutation.
ComplexVec norm_add(std::span<const ComplexView> inputs);
ComplexVec norm_add(std::span<const ComplexVec> inputs);
/// Re<q, conj(e)> = Re(q).Re(e) + Im(q).Im(e).
double herm_score(ComplexView q, ComplexView e);
/// herm_score of q against every row, in one pass over the table.
std::vector<double> score_all(ComplexView q, const EntityTable& table);
void score_all(ComplexView q, const EntityTable& table, std::span<double> out);

/// Mean absolute value over the 2d stacked components.
double mean_abs(ComplexView v);

/// [re; im] as one real vector of length 2d, and back.
std::vector<double> stack(ComplexView v);
ComplexVec split(std::span<const double> stacked);
/// stack(a) followed by stack(b).
std::vector<double> concat_stacked(ComplexView a, ComplexView b);

// --- gradients ------------------------------------------------------------

struct BindGrad {
  ComplexVec a;
  ComplexVec b;
};

/// Gradients of a real loss w.r.t. the inputs of bind(a, b), given the
/// gradient w.r.t. its output.
BindGrad bind_backward(ComplexView a, ComplexView b, ComplexView grad_out);
/// Gradient w.r.t. every input of norm_add, in input order.
std::vector<ComplexVec> norm_add_backward(std::span<const ComplexView> inputs,
                                          ComplexView grad_out);

/// dst += scale * src.
void axpy(ComplexVec& dst, ComplexView src, double scale = 1.0);

}  // namespace lvsa
