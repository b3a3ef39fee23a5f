#pragma once

// One-dimensional quadrature helpers: adaptive Simpson behind a power-law
// substitution that absorbs an algebraic left-endpoint singularity, a
// tanh-sinh rule that exposes exact endpoint distances, and Gauss-Legendre
// nodes on an interval.

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "errors.hpp"

namespace wignerlab::quad {

struct AdaptiveResult {
  double value = 0.0;
  double error_bound = 0.0;
  int evaluations = 0;
  bool converged = true;
};

namespace detail {

template <class F>
struct SimpsonState {
  F& f;
  int budget;
  int evaluations = 0;
  double error = 0.0;
  bool converged = true;
};

template <class F>
double simpson_rec(SimpsonState<F>& st, double a, double fa, double m, double fm, double b,
                   double fb, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = st.f(lm), frm = st.f(rm);
  st.evaluations += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol || depth <= 0 || st.evaluations >= st.budget) {
    if (std::abs(delta) > 15.0 * tol) st.converged = false;
    st.error += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return simpson_rec(st, a, fa, lm, flm, m, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(st, m, fm, rm, frm, b, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson of f on [a, b] to absolute tolerance tol.
template <class F>
AdaptiveResult adaptive_simpson(F&& f, double a, double b, double tol, int max_evals = 200000,
                                int max_depth = 48) {
  AdaptiveResult out;
  if (!(b > a)) return out;
  detail::SimpsonState<F> st{f, max_evals};
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  st.evaluations = 3;
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  out.value = detail::simpson_rec(st, a, fa, m, fm, b, fb, whole, tol, max_depth);
  out.error_bound = st.error;
  out.evaluations = st.evaluations;
  out.converged = st.converged;
  return out;
}

/// Integral of g over [a, b] where g(s) ~ (s - a)^(-e) near a, e < 1. Substitutes
/// s = a + (b - a) u^kappa with kappa = 1/(1 - e) so the integrand in u is bounded.
/// g receives (s, s - a) so the singular factor can use the exact offset.
template <class G>
AdaptiveResult singular_left_integral(G&& g, double a, double b, double e, double tol,
                                      int max_evals = 200000) {
  if (!(e < 1.0)) throw DomainError("non-integrable endpoint singularity");
  const double kappa = e > 0.0 ? 1.0 / (1.0 - e) : 1.0;
  const double len = b - a;
  auto h = [&](double u) {
    if (u <= 0.0) {
      // limit of len*kappa*u^(kappa-1) * g(a + len u^kappa) as u -> 0 is finite
      // (equals the coefficient of the singular part); approximate by a tiny u
      u = 1e-12;
    }
    const double off = len * std::pow(u, kappa);
    return len * kappa * std::pow(u, kappa - 1.0) * g(a + off, off);
  };
  return adaptive_simpson(h, 0.0, 1.0, tol, max_evals);
}

/// Tanh-sinh on [a, b] with step halving until successive estimates agree to tol
/// (relative) or max_refinements halvings are done. f is called as f(x, da, db)
/// with da = x - a and db = b - x computed without cancellation, so integrands
/// singular at an endpoint can use the exact distances.
template <class F>
double tanh_sinh(F&& f, double a, double b, int max_refinements = 8, double tol = 1e-10,
                 double* error = nullptr) {
  if (!(b > a)) return 0.0;
  constexpr double kHalfPi = 1.5707963267948966;
  constexpr double kTMax = 6.5;
  const double len = b - a;
  // Contribution of the node pair at +-t (or the centre when t == 0).
  auto pair = [&](double t) {
    const double u = kHalfPi * std::sinh(t);
    const double e = std::exp(-2.0 * u);
    const double near = len * e / (1.0 + e);  // distance to the nearer endpoint
    const double ch = std::cosh(u);
    const double w = 0.5 * len * kHalfPi * std::cosh(t) / (ch * ch);
    if (!(w > 0.0) || !(near > 0.0)) return 0.0;
    if (t == 0.0) return w * f(a + 0.5 * len, 0.5 * len, 0.5 * len);
    const double far = len - near;
    return w * (f(b - near, far, near) + f(a + near, near, far));
  };
  double h = 1.0;
  double sum = pair(0.0);
  for (double t = h; t <= kTMax; t += h) sum += pair(t);
  double estimate = h * sum, diff = std::abs(estimate);
  for (int level = 1; level <= max_refinements; ++level) {
    h *= 0.5;
    for (double t = h; t <= kTMax; t += 2.0 * h) sum += pair(t);
    const double next = h * sum;
    diff = std::abs(next - estimate);
    estimate = next;
    if (level >= 3 && diff <= tol * std::abs(estimate)) break;
  }
  if (error) *error = diff;
  return estimate;
}

struct Nodes {
  std::vector<double> x;
  std::vector<double> w;
};

/// Eight-point Gauss-Legendre rule mapped to [a, b].
inline Nodes gauss_legendre8(double a, double b) {
  using Rule = boost::math::quadrature::gauss<double, 8>;
  Nodes out;
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  const auto& xs = Rule::abscissa();
  const auto& ws = Rule::weights();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] == 0.0) {
      out.x.push_back(mid);
      out.w.push_back(half * ws[i]);
      continue;
    }
    out.x.push_back(mid - half * xs[i]);
    out.w.push_back(half * ws[i]);
    out.x.push_back(mid + half * xs[i]);
    out.w.push_back(half * ws[i]);
  }
  return out;
}

}  // namespace wignerlab::quad
