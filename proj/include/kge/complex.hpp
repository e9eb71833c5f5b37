#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace kge {

// Non-owning view of a complex vector stored as separate real/imaginary planes.
struct ComplexView {
  std::span<const double> re;
  std::span<const double> im;

  std::size_t dim() const { return re.size(); }
};

// A d-dimensional complex embedding. The conjugate is never materialized;
// scoring kernels negate the imaginary plane where needed.
struct ComplexVector {
  std::vector<double> re;
  std::vector<double> im;

  ComplexVector() = default;
  explicit ComplexVector(std::size_t d) : re(d, 0.0), im(d, 0.0) {}
  ComplexVector(std::vector<double> r, std::vector<double> i) : re(std::move(r)), im(std::move(i)) {
    if (re.size() != im.size()) throw std::invalid_argument("complex vector: plane length mismatch");
  }

  std::size_t dim() const { return re.size(); }
  ComplexView view() const { return {re, im}; }
  operator ComplexView() const { return view(); }
};

namespace detail {
inline void check_dims(ComplexView a, ComplexView b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("complex vector: dimension mismatch");
}
}  // namespace detail

// Per-pair coefficients of the quadrilinear form, grouped by the tail's
// planes:  score(t) = sum_j coeff_re[j]*Re(t)_j + coeff_im[j]*Im(t)_j.
// Factoring them out lets one (g, h, r) context score every candidate tail
// with the same floating-point operation order as the one-shot kernel, so
// batched scoring and single-triple scoring agree bitwise.
struct QuadCoefficients {
  std::vector<double> t1;  // Re(g)*Re(h)*Re(r)   (pairs with Re t)
  std::vector<double> t2;  // Re(g)*Re(h)*Im(r)   (pairs with Im t)
  std::vector<double> t3;  // Im(g)*Im(h)*Re(r)   (pairs with Im t)
  std::vector<double> t4;  // Im(g)*Im(h)*Im(r)   (pairs with Re t, negated)

  std::size_t dim() const { return t1.size(); }
};

inline QuadCoefficients quad_coefficients(ComplexView g, ComplexView h, ComplexView r) {
  detail::check_dims(g, h);
  detail::check_dims(h, r);
  const std::size_t d = g.dim();
  QuadCoefficients c;
  c.t1.resize(d);
  c.t2.resize(d);
  c.t3.resize(d);
  c.t4.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double gh_re = g.re[j] * h.re[j];
    const double gh_im = g.im[j] * h.im[j];
    c.t1[j] = gh_re * r.re[j];
    c.t2[j] = gh_re * r.im[j];
    c.t3[j] = gh_im * r.re[j];
    c.t4[j] = gh_im * r.im[j];
  }
  return c;
}

inline double quad_score_with(const QuadCoefficients& c, ComplexView t) {
  if (c.dim() != t.dim()) throw std::invalid_argument("complex vector: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < c.dim(); ++j) {
    s += c.t1[j] * t.re[j];
    s += c.t2[j] * t.im[j];
    s += c.t3[j] * t.im[j];
    s -= c.t4[j] * t.re[j];
  }
  return s;
}

// Score of the modulated Hermitian form:
//   <Re g, Re h, Re r, Re t> + <Re g, Re h, Im r, Im t>
//   + <Im g, Im h, Re r, Im t> - <Im g, Im h, Im r, Re t>.
// The g vector acts as a per-plane multiplicative gate; g = 1+1i
// componentwise reduces the form to Re(<h, r, conj(t)>).
inline double quad_score(ComplexView g, ComplexView h, ComplexView r, ComplexView t) {
  detail::check_dims(r, t);
  return quad_score_with(quad_coefficients(g, h, r), t);
}

// Re(<h, r, conj(t)>): quad_score with the gate fixed to 1+1i componentwise.
inline double hermitian_score(ComplexView h, ComplexView r, ComplexView t) {
  detail::check_dims(h, r);
  detail::check_dims(r, t);
  const std::size_t d = h.dim();
  QuadCoefficients c;
  c.t1.resize(d);
  c.t2.resize(d);
  c.t3.resize(d);
  c.t4.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double gh_re = 1.0 * h.re[j];
    const double gh_im = 1.0 * h.im[j];
    c.t1[j] = gh_re * r.re[j];
    c.t2[j] = gh_re * r.im[j];
    c.t3[j] = gh_im * r.re[j];
    c.t4[j] = gh_im * r.im[j];
  }
  return quad_score_with(c, t);
}

// <Re h, Re r, Re t>: the real-plane trilinear product.
inline double trilinear_real_score(ComplexView h, ComplexView r, ComplexView t) {
  detail::check_dims(h, r);
  detail::check_dims(r, t);
  double s = 0.0;
  for (std::size_t j = 0; j < h.dim(); ++j) {
    s += h.re[j] * r.re[j] * t.re[j];
  }
  return s;
}

}  // namespace kge
