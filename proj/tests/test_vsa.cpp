#include <cmath>

#include "doctest.h"
#include "lvsa/error.hpp"
#include "lvsa/random.hpp"
#include "lvsa/vsa.hpp"

using namespace lvsa;

namespace {

ComplexVec c1(double re, double im) { return {{re}, {im}}; }

ComplexVec random_vec(Rng& rng, std::size_t d) {
  ComplexVec v = ComplexVec::zeros(d);
  for (std::size_t k = 0; k < d; ++k) {
    v.re[k] = rng.uniform(-1, 1);
    v.im[k] = rng.uniform(-1, 1);
  }
  return v;
}

double dot(const ComplexVec& a, const ComplexVec& b) {
  double s = 0;
  for (std::size_t k = 0; k < a.dim(); ++k) s += a.re[k] * b.re[k] + a.im[k] * b.im[k];
  return s;
}

}  // namespace

TEST_CASE("bind") {
  Rng rng(1);
  const ComplexVec x = random_vec(rng, 5);
  CHECK(bind(ComplexVec::ones(5), x) == x);
  CHECK(bind(c1(1, 2), c1(3, 1)) == c1(1, 7));
  const ComplexVec y = random_vec(rng, 5);
  CHECK(bind(x, y) == bind(y, x));
  CHECK_THROWS_AS(bind(x, random_vec(rng, 4)), DimensionError);
}

TEST_CASE("conjugate") {
  Rng rng(2);
  const ComplexVec x = random_vec(rng, 4);
  CHECK(conjugate(conjugate(x)) == x);
  ComplexVec real = x;
  std::fill(real.im.begin(), real.im.end(), 0.0);
  CHECK(conjugate(real).re == real.re);
  for (double v : conjugate(real).im) CHECK(v == 0.0);
  CHECK(conjugate(c1(2, 3)) == c1(2, -3));
}

TEST_CASE("norm_add") {
  Rng rng(3);
  const ComplexVec x = random_vec(rng, 6);
  const ComplexVec one[] = {x};
  CHECK(norm_add(one) == x);
  const ComplexVec two[] = {x, x};
  const ComplexVec xx = norm_add(two);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(xx.re[k] == doctest::Approx(x.re[k]).epsilon(1e-15));
    CHECK(xx.im[k] == doctest::Approx(x.im[k]).epsilon(1e-15));
  }
  const ComplexVec hand[] = {c1(1, 0), c1(0, 1)};
  const ComplexVec h = norm_add(hand);
  CHECK(h.re[0] == doctest::Approx(0.5));
  CHECK(h.im[0] == doctest::Approx(0.5));
  // antipodal inputs cancel to the zero vector
  ComplexVec neg = x;
  for (double& v : neg.re) v = -v;
  for (double& v : neg.im) v = -v;
  const ComplexVec anti[] = {x, neg};
  CHECK(norm_add(anti) == ComplexVec::zeros(6));
  CHECK_THROWS_AS(norm_add(std::span<const ComplexVec>()), ArityError);
  const ComplexVec mixed[] = {x, random_vec(rng, 3)};
  CHECK_THROWS_AS(norm_add(mixed), DimensionError);
}

TEST_CASE("norm_add ignores input order bitwise") {
  Rng rng(4);
  std::vector<ComplexVec> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(random_vec(rng, 7));
  const ComplexVec ref = norm_add(xs);
  for (int t = 0; t < 20; ++t) {
    rng.shuffle(xs.begin(), xs.end());
    CHECK(norm_add(xs) == ref);
  }
}

TEST_CASE("herm_score") {
  Rng rng(5);
  const ComplexVec x = random_vec(rng, 8);
  CHECK(herm_score(x, x) == doctest::Approx(dot(x, x)));
  CHECK(herm_score(c1(1, 2), c1(3, 1)) == 5.0);
  CHECK(herm_score(c1(1, 0), c1(0, 1)) == 0.0);
  CHECK_THROWS_AS(herm_score(x, c1(1, 1)), DimensionError);
}

TEST_CASE("score_all") {
  EntityTable t(3, 3);
  for (std::size_t i = 0; i < 3; ++i) t.row_re(i)[i] = 1.0;
  const ComplexVec q = {{0.5, -2.0, 3.0}, {9.0, 9.0, 9.0}};
  CHECK(score_all(q, t) == std::vector<double>{0.5, -2.0, 3.0});
  Rng rng(6);
  EntityTable big(20, 6);
  for (double& v : big.data()) v = rng.uniform(-1, 1);
  const ComplexVec r = random_vec(rng, 6);
  const auto s = score_all(r, big);
  for (std::size_t i = 0; i < 20; ++i) CHECK(s[i] == herm_score(r, big.row(i)));
  for (double v : score_all(ComplexVec::zeros(6), big)) CHECK(v == 0.0);
  CHECK_THROWS_AS(score_all(c1(1, 1), big), DimensionError);
}

TEST_CASE("stack and split") {
  const ComplexVec x = {{1, 2}, {3, 4}};
  CHECK(stack(x) == std::vector<double>{1, 2, 3, 4});
  CHECK(split(stack(x)) == x);
  CHECK(concat_stacked(x, x).size() == 8);
  CHECK(mean_abs(ComplexVec{{-1, 2}, {3, -4}}) == 2.5);
}

TEST_CASE("bind and norm_add gradients match finite differences") {
  Rng rng(7);
  const std::size_t d = 4;
  const double h = 1e-6;
  const ComplexVec a = random_vec(rng, d), b = random_vec(rng, d), g = random_vec(rng, d);
  const BindGrad bg = bind_backward(a, b, g);
  for (std::size_t k = 0; k < d; ++k) {
    ComplexVec ap = a, am = a;
    ap.re[k] += h;
    am.re[k] -= h;
    const double fd = (dot(bind(ap, b), g) - dot(bind(am, b), g)) / (2 * h);
    CHECK(bg.a.re[k] == doctest::Approx(fd).epsilon(1e-6));
    ComplexVec bp = b, bm = b;
    bp.im[k] += h;
    bm.im[k] -= h;
    const double fd2 = (dot(bind(a, bp), g) - dot(bind(a, bm), g)) / (2 * h);
    CHECK(bg.b.im[k] == doctest::Approx(fd2).epsilon(1e-6));
  }
  std::vector<ComplexVec> xs = {random_vec(rng, d), random_vec(rng, d), random_vec(rng, d)};
  std::vector<ComplexView> views(xs.begin(), xs.end());
  const auto grads = norm_add_backward(views, g);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      for (int part = 0; part < 2; ++part) {
        auto p = xs, m = xs;
        (part ? p[i].im : p[i].re)[k] += h;
        (part ? m[i].im : m[i].re)[k] -= h;
        const double fd = (dot(norm_add(p), g) - dot(norm_add(m), g)) / (2 * h);
        const double an = (part ? grads[i].im : grads[i].re)[k];
        CHECK(an == doctest::Approx(fd).epsilon(1e-5));
      }
    }
  }
}
