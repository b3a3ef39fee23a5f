#pragma once

// Kernels of the Tchebycheff processes, their L2 norms, Galerkin discretisations
// of the Rosenblatt operator and the trace formula for its free cumulants.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "errors.hpp"
#include "freecalc.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace wignerlab::kernels {

/// Covariance 1/2 (t^{2H} + s^{2H} - |t - s|^{2H}) of the semicircular fBm.
inline double ncfbm_cov(double H, double s, double t) {
  if (!(H > 0.0 && H < 1.0)) throw DomainError("H must lie in (0,1)");
  if (s < 0.0 || t < 0.0) throw DomainError("times must be non-negative");
  return 0.5 * (std::pow(t, 2 * H) + std::pow(s, 2 * H) - std::pow(std::abs(t - s), 2 * H));
}

struct KernelSpec {
  int q = 2;
  double H = 0.7;
  double t = 1.0;

  void validate() const {
    if (q < 1) throw DomainError("q must be positive");
    if (!(t > 0.0)) throw DomainError("t must be positive");
    if (q >= 2 && !(H > 0.5 && H < 1.0)) throw DomainError("H must lie in (1/2,1)");
    if (q == 1 && !(H > 0.0 && H < 1.0)) throw DomainError("H must lie in (0,1)");
  }
  /// Exponent e of the factors (s - x)_+^{-e}.
  double exponent() const { return 0.5 + (1.0 - H) / q; }
};

inline double beta_fn(double a, double b) {
  return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)) *
         (std::tgamma(a) < 0 ? -1.0 : 1.0) * (std::tgamma(b) < 0 ? -1.0 : 1.0) *
         (std::tgamma(a + b) < 0 ? -1.0 : 1.0);
}

/// sqrt(H(2H-1)) / beta(1/2 - (1-H)/q, (2-2H)/q)^{q/2}; needs H > 1/2.
inline double kernel_constant(int q, double H) {
  const double b = boost::math::beta(0.5 - (1.0 - H) / q, (2.0 - 2.0 * H) / q);
  return std::sqrt(H * (2.0 * H - 1.0)) / std::pow(b, 0.5 * q);
}

/// q = 1 closed form c_H [(t-x)_+^{H-1/2} - (-x)_+^{H-1/2}], valid for every H in (0,1).
inline double kernel_closed_form_q1(double H, double t, double x) {
  if (!(H > 0.0 && H < 1.0)) throw DomainError("H must lie in (0,1)");
  if (H == 0.5) return x >= 0.0 && x < t ? 1.0 : 0.0;
  const double a = H - 0.5;
  const double cH = std::sqrt(2.0 * H / (a * beta_fn(a, 2.0 - 2.0 * H)));
  if (x >= t) return 0.0;
  if (x >= 0.0) return cH * std::pow(t - x, a);
  // (t - x)^a - (-x)^a without cancellation for large |x|
  return cH * std::pow(-x, a) * std::expm1(a * std::log1p(t / -x));
}

struct KernelValue {
  double value = 0.0;
  double error_bound = 0.0;
};

/// c * int_0^t prod_i (s - x_i)_+^{-e} ds by adaptive Simpson after a power substitution
/// at the largest x_i. The product vanishes for s <= max x_i, so only [max(0, max x), t] counts.
inline KernelValue kernel_eval_quadrature(const KernelSpec& spec, const std::vector<double>& x,
                                          double tol = 1e-9, int max_evals = 400000) {
  spec.validate();
  if (static_cast<int>(x.size()) != spec.q)
    throw DomainError("kernel needs exactly q = " + std::to_string(spec.q) + " arguments");
  if (spec.q == 1 && !(spec.H > 0.5))
    throw DomainError("quadrature form of the q = 1 kernel needs H > 1/2");
  const double e = spec.exponent();
  const double top = *std::max_element(x.begin(), x.end());
  const double lo = std::max(0.0, top);
  KernelValue out;
  if (lo >= spec.t) return out;
  const int mult = static_cast<int>(std::count(x.begin(), x.end(), top));
  if (top >= 0.0 && e * mult >= 1.0)
    throw DomainError("kernel is infinite on this diagonal (coincident arguments)");
  const double c = kernel_constant(spec.q, spec.H);
  const double e_sub = top >= 0.0 ? e * mult : std::min(0.9, e * mult);
  auto g = [&](double s, double off) {
    double prod = 1.0;
    for (double xi : x) {
      const double d = (top >= 0.0 && xi == top) ? off : s - xi;
      prod *= std::pow(d, -e);
    }
    return prod;
  };
  // Absolute tolerance on the integral; the constant c is O(1).
  const auto r = quad::singular_left_integral(g, lo, spec.t, e_sub, tol / std::max(c, 1.0), max_evals);
  out.value = c * r.value;
  out.error_bound = c * r.error_bound;
  if (!r.converged && out.error_bound > tol)
    throw AccuracyError("kernel quadrature did not reach tolerance; achieved " +
                            std::to_string(out.error_bound),
                        out.error_bound);
  return out;
}

/// f_{H,q}(t, x). Uses the quadrature for H > 1/2 and the closed form for q = 1, H <= 1/2.
inline double kernel_eval(const KernelSpec& spec, const std::vector<double>& x, double tol = 1e-9) {
  spec.validate();
  if (spec.q == 1 && !(spec.H > 0.5)) {
    if (x.size() != 1) throw DomainError("kernel needs exactly q = 1 argument");
    return kernel_closed_form_q1(spec.H, spec.t, x[0]);
  }
  return kernel_eval_quadrature(spec, x, tol).value;
}

// ---------------------------------------------------------------------------
// Operators

struct DiscretizedOperator {
  enum class Domain { Time, Space };
  Domain domain = Domain::Time;
  double H = 0.7;
  double t = 1.0;
  double x_min = 0.0, x_max = 1.0;
  std::size_t m = 0;
  std::string layout;           // "uniform" or "graded"
  double truncated_mass = 0.0;  // estimated share of the L2 mass outside the grid
  linalg::Matrix matrix;        // symmetric m x m
};

inline constexpr std::size_t kMaxOperatorSize = 4096;

namespace detail {
inline void check_operator_args(double H, double t, std::size_t m) {
  if (!(H > 0.5 && H < 1.0)) throw DomainError("H must lie in (1/2,1)");
  if (!(t > 0.0)) throw DomainError("t must be positive");
  if (m < 2) throw DomainError("grid needs at least two cells");
  if (m > kMaxOperatorSize)
    throw SizeError("grid size " + std::to_string(m) + " exceeds " +
                    std::to_string(kMaxOperatorSize));
}

/// a_k = (1/h) int int over cells i, j with i - j = k of sqrt(H(2H-1)) |u - v|^{H-1}.
inline std::vector<double> time_cell_averages(double H, double t, std::size_t m) {
  const double g = H - 1.0;
  const double h = t / static_cast<double>(m);
  auto F = [&](double k) { return std::pow(std::abs(k), g + 2.0) / ((g + 1.0) * (g + 2.0)); };
  const double scale = std::sqrt(H * (2.0 * H - 1.0)) * std::pow(h, g + 1.0);
  std::vector<double> a(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double kk = static_cast<double>(k);
    a[k] = scale * (F(kk + 1.0) + F(kk - 1.0) - 2.0 * F(kk));
  }
  return a;
}
}  // namespace detail

/// Galerkin (cell-average) matrix on m cells of [0, t] of the operator with kernel
/// sqrt(H(2H-1)) |u - v|^{H-1}. Its non-zero spectrum is that of the Rosenblatt
/// kernel operator on L2(R), so its traces give the same free cumulants.
inline DiscretizedOperator reduced_operator(double H, double t, std::size_t m) {
  detail::check_operator_args(H, t, m);
  DiscretizedOperator op;
  op.domain = DiscretizedOperator::Domain::Time;
  op.H = H;
  op.t = t;
  op.x_min = 0.0;
  op.x_max = t;
  op.m = m;
  op.layout = "uniform";
  const auto a = detail::time_cell_averages(H, t, m);
  op.matrix = linalg::Matrix(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) op.matrix(i, j) = a[i > j ? i - j : j - i];
  return op;
}

struct SpaceGrid {
  double x_min = -8.0;
  double x_max = 1.0;
  std::size_t m = 1024;
  bool graded = false;  // geometric cells on [x_min, 0], uniform on [0, x_max]
};

/// Estimated share of the Rosenblatt kernel's L2 mass with an argument below x_min.
inline double truncated_mass_estimate(double H, double t, double x_min) {
  if (x_min >= 0.0) return 1.0;
  const double c = kernel_constant(2, H);
  const double b = boost::math::beta(H / 2.0, 1.0 - H);
  const double tail = std::pow(-x_min + 0.5 * t, H - 1.0) / (1.0 - H);
  const double inner = 2.0 * std::pow(t, H + 1.0) / (H * (H + 1.0));
  return std::min(1.0, 2.0 * c * c * b * tail * inner / std::pow(t, 2.0 * H));
}

/// Galerkin matrix of the Rosenblatt kernel f_H(t, x, y) on cells of [x_min, x_max],
/// in the orthonormal basis of normalised cell indicators. Cell integrals of the
/// kernel factor through E_l(s) = int_cell (s - x)_+^{H/2 - 1} dx, which is exact,
/// so A = B B^T with B sampled on a quadrature in s. A is symmetric and PSD.
inline DiscretizedOperator discretize_operator(double H, double t, const SpaceGrid& grid) {
  detail::check_operator_args(H, t, grid.m);
  if (!(grid.x_min < 0.0 && grid.x_max > grid.x_min))
    throw DomainError("grid needs x_min < 0 < x_max");
  std::vector<double> edges;
  const std::size_t m = grid.m;
  if (!grid.graded) {
    for (std::size_t i = 0; i <= m; ++i)
      edges.push_back(grid.x_min + (grid.x_max - grid.x_min) * static_cast<double>(i) /
                                       static_cast<double>(m));
  } else {
    const double upper = std::min(grid.x_max, t);
    const std::size_t m_in = m / 2, m_out = m - m_in;
    const double h = upper / static_cast<double>(m_in);
    // geometric widths h r, h r^2, ... summing to -x_min; solve for r by bisection
    const double span = -grid.x_min;
    double lo = 1.0 + 1e-12, hi = 2.0;
    auto total = [&](double r) { return h * r * (std::pow(r, static_cast<double>(m_out)) - 1.0) / (r - 1.0); };
    while (total(hi) < span) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (total(mid) < span ? lo : hi) = mid;
    }
    const double r = hi;
    std::vector<double> neg{0.0};
    double w = h;
    for (std::size_t i = 0; i < m_out; ++i) {
      w *= r;
      neg.push_back(neg.back() - w);
    }
    neg.back() = grid.x_min;
    edges.assign(neg.rbegin(), neg.rend());
    for (std::size_t i = 1; i <= m_in; ++i) edges.push_back(upper * static_cast<double>(i) / static_cast<double>(m_in));
  }
  const std::size_t cells = edges.size() - 1;

  // s-quadrature on [0, t], split at cell edges, graded towards each left end.
  const double gamma = H / 2.0;
  const double kappa = 1.0 / gamma;
  std::vector<double> cuts{0.0};
  for (double e : edges)
    if (e > 0.0 && e < t) cuts.push_back(e);
  cuts.push_back(t);
  std::vector<double> s_nodes, s_weights;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], len = cuts[k + 1] - cuts[k];
    const auto gl = quad::gauss_legendre8(0.0, 1.0);
    for (std::size_t i = 0; i < gl.x.size(); ++i) {
      const double u = gl.x[i];
      s_nodes.push_back(a + len * std::pow(u, kappa));
      s_weights.push_back(gl.w[i] * len * kappa * std::pow(u, kappa - 1.0));
    }
  }
  const double c = kernel_constant(2, H);
  linalg::Matrix B(cells, s_nodes.size());
  parallel_for(cells, [&](std::size_t l) {
    const double xl = edges[l], xr = edges[l + 1], w = xr - xl;
    for (std::size_t k = 0; k < s_nodes.size(); ++k) {
      const double s = s_nodes[k];
      const double left = s > xl ? std::pow(s - xl, gamma) : 0.0;
      const double right = s > xr ? std::pow(s - xr, gamma) : 0.0;
      B(l, k) = std::sqrt(c * s_weights[k] / w) * (left - right) / gamma;
    }
  });
  DiscretizedOperator op;
  op.domain = DiscretizedOperator::Domain::Space;
  op.H = H;
  op.t = t;
  op.x_min = grid.x_min;
  op.x_max = grid.x_max;
  op.m = cells;
  op.layout = grid.graded ? "graded" : "uniform";
  op.truncated_mass = truncated_mass_estimate(H, t, grid.x_min);
  op.matrix = linalg::gram_rows(B);
  return op;
}

// ---------------------------------------------------------------------------
// Norms and cumulants

struct KernelNorm {
  double grid = 0.0;      // Hilbert-Schmidt norm^2 of the discretised kernel
  double refined = 0.0;   // Richardson extrapolation from grids m/2 and m
  double analytic = 0.0;  // t^{2H}
  bool coarse = false;    // |grid - analytic| / analytic > 10%
  std::size_t m = 0;
};

namespace detail {
/// Sum_{ij} A_ij^2 for the Toeplitz time-domain matrix, in O(m).
inline double time_hs_norm_sq(double H, double t, std::size_t m) {
  const auto a = time_cell_averages(H, t, m);
  CompensatedSum s;
  s.add(static_cast<double>(m) * a[0] * a[0]);
  for (std::size_t k = 1; k < m; ++k) s.add(2.0 * static_cast<double>(m - k) * a[k] * a[k]);
  return s.value();
}
}  // namespace detail

/// int f_{H,q}(t, x)^2 dx. Both paths use the reduction to
/// H(2H-1) int_0^t int_0^t |u - v|^{2H-2} du dv = t^{2H}: "grid" is the
/// Hilbert-Schmidt norm of its m-cell Galerkin matrix, whose error decays like
/// m^{1-2H}; "refined" removes that leading term.
inline KernelNorm kernel_l2_norm_sq(const KernelSpec& spec, std::size_t m = 2048) {
  spec.validate();
  KernelNorm out;
  out.analytic = std::pow(spec.t, 2.0 * spec.H);
  out.m = m;
  if (spec.q == 1 && !(spec.H > 0.5)) {
    // No time-domain reduction below H = 1/2; integrate the closed form in x.
    auto f2 = [&](double x) {
      const double v = kernel_closed_form_q1(spec.H, spec.t, x);
      return v * v;
    };
    double val = quad::tanh_sinh([&](double x, double, double) { return f2(x); }, 0.0, spec.t, 10, 1e-12);
    // x < 0: substitute x = -y / (1 - y), y in (0, 1)
    val += quad::tanh_sinh(
        [&](double y, double, double db) {
          if (!(db > 0.0)) return 0.0;
          const double r = kernel_closed_form_q1(spec.H, spec.t, -y / db) / db;
          return std::isfinite(r) ? r * r : 0.0;
        },
        0.0, 1.0, 10, 1e-12);
    out.grid = out.refined = val;
    out.coarse = std::abs(out.grid - out.analytic) > 0.1 * out.analytic;
    return out;
  }
  if (m < 4) throw DomainError("grid needs at least four cells");
  if (m > (1u << 24)) throw SizeError("grid size too large");
  out.grid = detail::time_hs_norm_sq(spec.H, spec.t, m);
  const double coarse = detail::time_hs_norm_sq(spec.H, spec.t, m / 2);
  const double f = std::pow(2.0, 2.0 * spec.H - 1.0);
  out.refined = (f * out.grid - coarse) / (f - 1.0);
  out.coarse = std::abs(out.grid - out.analytic) > 0.1 * out.analytic;
  return out;
}

struct CumulantRow {
  int p;
  double via_trace;
  double via_eigen;
};

inline constexpr int kMaxCumulantPower = 10;

/// kappa_p = Tr(A^p), p = 2..p_max, by matrix powers and by eigenvalues; the two
/// must agree to 1e-9 relative.
inline std::vector<CumulantRow> free_cumulants_trace(const DiscretizedOperator& op, int p_max,
                                                     double agreement = 1e-9) {
  if (p_max < 2 || p_max > kMaxCumulantPower)
    throw DomainError("p_max must lie in [2, 10]");
  const auto& A = op.matrix;
  // powers[k] = A^k for k = 1..ceil(p_max/2)
  const int half = (p_max + 1) / 2;
  std::vector<linalg::Matrix> powers{linalg::Matrix(), A};
  for (int k = 2; k <= half; ++k) powers.push_back(linalg::multiply(powers.back(), A));
  const auto eig = linalg::symmetric_eigen(A);
  std::vector<CumulantRow> out;
  for (int p = 2; p <= p_max; ++p) {
    const double tr = linalg::trace_of_product_symmetric(powers[p / 2], powers[p - p / 2]);
    CompensatedSum s;
    for (double lam : eig.values) s.add(std::pow(lam, p));
    const double ev = s.value();
    const double scale = std::max(std::abs(tr), std::abs(ev));
    if (scale > 0.0 && std::abs(tr - ev) > agreement * scale)
      throw NumericError("trace and eigenvalue cumulants disagree at p = " + std::to_string(p) +
                             " (relative " + std::to_string(std::abs(tr - ev) / scale) + ")",
                         eig.sweeps);
    out.push_back({p, tr, ev});
  }
  return out;
}

/// Cumulants of the time-domain operator on m cells, Richardson-refined from m/2
/// using the leading error exponent pH - 1 of Tr(A^p).
inline std::vector<double> refined_cumulants(double H, double t, std::size_t m, int p_max) {
  const auto fine = free_cumulants_trace(reduced_operator(H, t, m), p_max);
  const auto coarse = free_cumulants_trace(reduced_operator(H, t, m / 2), p_max);
  std::vector<double> out;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const double f = std::pow(2.0, fine[i].p * H - 1.0);
    out.push_back((f * fine[i].via_trace - coarse[i].via_trace) / (f - 1.0));
  }
  return out;
}

/// Moments m_1..m_{n_max} of the Rosenblatt marginal from its free cumulants
/// (kappa_1 = 0, kappa_p = Tr(A^p)).
inline std::vector<double> rosenblatt_moments_via_cumulants(double H, double t, std::size_t m,
                                                            int n_max, bool refine = true) {
  if (n_max < 1 || n_max > 8) throw DomainError("n_max must lie in [1, 8]");
  std::vector<double> kappa{0.0};
  if (n_max >= 2) {
    if (refine) {
      for (double k : refined_cumulants(H, t, m, n_max)) kappa.push_back(k);
    } else {
      for (const auto& row : free_cumulants_trace(reduced_operator(H, t, m), n_max))
        kappa.push_back(row.via_trace);
    }
  }
  return freecalc::free_moments_from_cumulants(kappa, n_max);
}

}  // namespace wignerlab::kernels
