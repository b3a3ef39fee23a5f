#pragma once

// Brute-force reference for lattice joint moments: each U_q(X_k) is expanded into
// monomials and every monomial word is evaluated with the semicircular Wick rule.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <wignerlab/covariance.hpp>
#include <wignerlab/freecalc.hpp>
#include <wignerlab/moments.hpp>
#include <wignerlab/poly.hpp>

namespace wignerlab::testing {

/// phi(prod_i sum_{k < [n t_i]} U_{q_i}(X_k)) by lattice enumeration and the Wick rule.
inline double wick_oracle(const std::vector<int>& q_list, const std::vector<double>& t_list,
                          long long n, const CovarianceModel& model) {
  const std::size_t p = q_list.size();
  std::vector<std::vector<double>> mono(p);
  for (std::size_t i = 0; i < p; ++i) {
    const auto rows = poly::basis_matrix<double>(poly::Basis::Tchebycheff, static_cast<std::size_t>(q_list[i]));
    mono[i] = rows[static_cast<std::size_t>(q_list[i])];
  }
  std::vector<long long> size(p);
  for (std::size_t i = 0; i < p; ++i) size[i] = moments::lattice_size(n, t_list[i]);
  for (long long s : size)
    if (s < 1) return 0.0;
  std::vector<long long> k(p, 0);
  double total = 0.0;
  for (;;) {
    // Sum over monomial degrees d_i of prod c_{d_i} * phi(X_{k_1}^{d_1} ... X_{k_p}^{d_p}).
    std::vector<std::size_t> d(p, 0);
    for (;;) {
      double coeff = 1.0;
      std::vector<int> word;
      for (std::size_t i = 0; i < p; ++i) {
        coeff *= mono[i][d[i]];
        for (std::size_t r = 0; r < d[i]; ++r) word.push_back(static_cast<int>(i));
      }
      if (coeff != 0.0) {
        total += coeff * freecalc::wick_joint_moment_with(
                             [&](int a, int b) { return model(k[static_cast<std::size_t>(a)] - k[static_cast<std::size_t>(b)]); },
                             word);
      }
      std::size_t j = 0;
      while (j < p && ++d[j] == mono[j].size()) d[j++] = 0;
      if (j == p) break;
    }
    std::size_t j = 0;
    while (j < p && ++k[j] == size[j]) k[j++] = 0;
    if (j == p) break;
  }
  return total;
}

/// Table model rho(k) = sum_j w_j cos(theta_j k) on `lags` lags (zero beyond).
inline CovarianceModel random_table_model(std::mt19937_64& eng, std::size_t lags = 6) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int terms = 3;
  std::vector<double> w(terms), th(terms);
  double sum = 0.0;
  for (int j = 0; j < terms; ++j) {
    w[j] = u(eng);
    th[j] = 3.14159 * u(eng);
    sum += w[j];
  }
  std::vector<double> v(lags, 0.0);
  for (std::size_t k = 0; k < lags; ++k)
    for (int j = 0; j < terms; ++j) v[k] += w[j] / sum * std::cos(th[j] * static_cast<double>(k));
  v[0] = 1.0;
  return CovarianceModel::table(v);
}

inline bool rel_close(double a, double b, double tol) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) <= tol * scale || (a == 0.0 && b == 0.0);
}

}  // namespace wignerlab::testing
