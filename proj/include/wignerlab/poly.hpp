#pragma once

// Tchebycheff (second kind, semicircular normalisation) and probabilists'
// Hermite polynomials: evaluation, basis matrices and basis decomposition.
//
//   x U_k = U_{k+1} + U_{k-1},   U_0 = 1, U_1 = x
//   y H_k = H_{k+1} + k H_{k-1}, H_0 = 1, H_1 = y
//
// Both families are monic, so the basis matrix is unit lower triangular and
// decomposition is plain back-substitution from the top degree down.

#include <cmath>
#include <cstddef>
#include <optional>
#include <type_traits>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "errors.hpp"

namespace wignerlab::poly {

using Rational = boost::multiprecision::cpp_rational;

enum class Basis { Tchebycheff, Hermite };

inline const char* to_string(Basis b) { return b == Basis::Tchebycheff ? "tcheb" : "hermite"; }

inline constexpr std::size_t kDefaultMaxDegree = 64;

template <class T>
T tcheb_u(unsigned k, const T& x) {
  T prev = T(1);
  if (k == 0) return prev;
  T cur = x;
  for (unsigned j = 1; j < k; ++j) {
    T next = x * cur - prev;
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

template <class T>
T hermite_h(unsigned k, const T& x) {
  T prev = T(1);
  if (k == 0) return prev;
  T cur = x;
  for (unsigned j = 1; j < k; ++j) {
    T next = x * cur - T(j) * prev;
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

template <class T>
T basis_eval(Basis basis, unsigned k, const T& x) {
  return basis == Basis::Tchebycheff ? tcheb_u(k, x) : hermite_h(k, x);
}

/// Row s holds the monomial coefficients of P_s (P = U or H), s = 0..degree.
template <class T>
std::vector<std::vector<T>> basis_matrix(Basis basis, std::size_t degree) {
  std::vector<std::vector<T>> rows(degree + 1, std::vector<T>(degree + 1, T(0)));
  rows[0][0] = T(1);
  if (degree == 0) return rows;
  rows[1][1] = T(1);
  for (std::size_t s = 1; s < degree; ++s) {
    // P_{s+1} = x P_s - c_s P_{s-1}
    const T c = basis == Basis::Tchebycheff ? T(1) : T(static_cast<long>(s));
    for (std::size_t d = 0; d <= s; ++d) rows[s + 1][d + 1] += rows[s][d];
    for (std::size_t d = 0; d + 1 <= s; ++d) rows[s + 1][d] -= c * rows[s - 1][d];
  }
  return rows;
}

/// Coefficients a_s of a polynomial in one of the two bases, plus its rank
/// (smallest s >= 1 with a_s != 0). A constant term a_0 is kept, not rejected.
template <class T>
struct Expansion {
  Basis basis = Basis::Tchebycheff;
  std::vector<T> coeffs;  // index = degree s
  std::optional<unsigned> rank;

  std::size_t degree() const { return coeffs.empty() ? 0 : coeffs.size() - 1; }
  T coeff(std::size_t s) const { return s < coeffs.size() ? coeffs[s] : T(0); }
};

using TchebExpansion = Expansion<double>;
using ExactExpansion = Expansion<Rational>;

struct DecomposeOptions {
  std::size_t max_degree = kDefaultMaxDegree;
  double zero_threshold = 1e-12;  // floating point only; |a_s| below it snaps to 0
};

namespace detail {
template <class T>
bool is_zero(const T& v, double threshold) {
  if constexpr (std::is_floating_point_v<T>)
    return std::abs(v) < threshold;
  else
    return v == 0;
}

template <class T>
std::vector<T> trim(std::vector<T> c) {
  while (c.size() > 1 && c.back() == T(0)) c.pop_back();
  if (c.empty()) c.push_back(T(0));
  return c;
}
}  // namespace detail

template <class T>
std::optional<unsigned> compute_rank(const std::vector<T>& coeffs, double zero_threshold = 0.0) {
  for (std::size_t s = 1; s < coeffs.size(); ++s)
    if (!detail::is_zero(coeffs[s], zero_threshold)) return static_cast<unsigned>(s);
  return std::nullopt;
}

template <class T>
Expansion<T> decompose(const std::vector<T>& monomial_coeffs, Basis basis,
                       const DecomposeOptions& opts = {}) {
  std::vector<T> rest = detail::trim(monomial_coeffs);
  const std::size_t degree = rest.size() - 1;
  if (degree > opts.max_degree)
    throw SizeError("decompose: degree " + std::to_string(degree) + " exceeds maximum " +
                    std::to_string(opts.max_degree));
  const auto rows = basis_matrix<T>(basis, degree);
  Expansion<T> out;
  out.basis = basis;
  out.coeffs.assign(degree + 1, T(0));
  for (std::size_t s = degree + 1; s-- > 0;) {
    const T a = rest[s];
    out.coeffs[s] = a;
    if (a == T(0)) continue;
    for (std::size_t d = 0; d <= s; ++d) rest[d] -= a * rows[s][d];
  }
  if constexpr (std::is_floating_point_v<T>) {
    for (T& a : out.coeffs)
      if (detail::is_zero(a, opts.zero_threshold)) a = T(0);
  }
  out.rank = compute_rank(out.coeffs, 0.0);
  return out;
}

/// Monomial coefficients of sum_s a_s P_s.
template <class T>
std::vector<T> reconstruct(const Expansion<T>& e) {
  const std::size_t degree = e.degree();
  const auto rows = basis_matrix<T>(e.basis, degree);
  std::vector<T> out(degree + 1, T(0));
  for (std::size_t s = 0; s <= degree; ++s) {
    if (e.coeffs[s] == T(0)) continue;
    for (std::size_t d = 0; d <= s; ++d) out[d] += e.coeffs[s] * rows[s][d];
  }
  return out;
}

/// Expansion with a single basis element a * P_s.
inline TchebExpansion single_term(Basis basis, unsigned s, double a = 1.0) {
  TchebExpansion e;
  e.basis = basis;
  e.coeffs.assign(s + 1, 0.0);
  e.coeffs[s] = a;
  e.rank = s >= 1 && a != 0.0 ? std::optional<unsigned>(s) : std::nullopt;
  return e;
}

/// Expansion from explicit basis coefficients (index = degree).
inline TchebExpansion from_basis_coeffs(Basis basis, std::vector<double> coeffs) {
  TchebExpansion e;
  e.basis = basis;
  e.coeffs = detail::trim(std::move(coeffs));
  e.rank = compute_rank(e.coeffs, 0.0);
  return e;
}

template <class T>
T eval_monomial(const std::vector<T>& coeffs, const T& x) {
  T acc = T(0);
  for (std::size_t d = coeffs.size(); d-- > 0;) acc = acc * x + coeffs[d];
  return acc;
}

template <class T>
T eval(const Expansion<T>& e, const T& x) {
  T acc = T(0);
  for (std::size_t s = 0; s < e.coeffs.size(); ++s)
    if (e.coeffs[s] != T(0)) acc += e.coeffs[s] * basis_eval(e.basis, static_cast<unsigned>(s), x);
  return acc;
}

inline ExactExpansion to_exact(const std::vector<long long>& monomial_coeffs, Basis basis,
                               const DecomposeOptions& opts = {}) {
  std::vector<Rational> c;
  c.reserve(monomial_coeffs.size());
  for (long long v : monomial_coeffs) c.emplace_back(v);
  return decompose(c, basis, opts);
}

}  // namespace wignerlab::poly
