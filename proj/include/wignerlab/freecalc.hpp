#pragma once

// Semicircle law, the semicircular Wick rule over non-crossing pairings, and
// the free moment-cumulant relations.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "combinat.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "parallel.hpp"

namespace wignerlab::freecalc {

inline constexpr int kMaxMomentOrder = 64;
inline constexpr int kMaxWordLength = combinat::kMaxPairingN;
inline constexpr int kMaxCumulantOrder = combinat::kMaxPartitionN;

/// C_k = binom(2k, k) / (k + 1), as a double (exact up to k = 33).
inline double catalan(int k) {
  double c = 1.0;
  for (int j = 0; j < k; ++j) c = c * 2.0 * (2.0 * j + 1.0) / (j + 2.0);
  return k <= 33 ? std::round(c) : c;
}

struct SemicircleLaw {
  double mean = 0.0;
  double variance = 1.0;

  SemicircleLaw() = default;
  SemicircleLaw(double m, double var) : mean(m), variance(var) {
    if (!(var > 0.0)) throw DomainError("semicircle variance must be positive");
  }
  double sigma() const { return std::sqrt(variance); }
};

inline double semicircle_central_moment(const SemicircleLaw& law, int k) {
  if (k < 0 || k > kMaxMomentOrder)
    throw DomainError("semicircle moment order must lie in [0, 64]");
  if (k % 2 != 0) return 0.0;
  return catalan(k / 2) * std::pow(law.variance, k / 2);
}

/// Raw moment E[X^k] via the binomial shift of the central moments.
inline double semicircle_moment(const SemicircleLaw& law, int k) {
  if (k < 0 || k > kMaxMomentOrder)
    throw DomainError("semicircle moment order must lie in [0, 64]");
  if (law.mean == 0.0) return semicircle_central_moment(law, k);
  CompensatedSum s;
  double binom = 1.0;
  for (int j = 0; j <= k; ++j) {
    if (j > 0) binom = binom * (k - j + 1) / j;
    if (j % 2 == 0) s.add(binom * semicircle_central_moment(law, j) * std::pow(law.mean, k - j));
  }
  return s.value();
}

inline double semicircle_density(const SemicircleLaw& law, double x) {
  const double d = x - law.mean;
  const double r2 = 4.0 * law.variance - d * d;
  if (r2 <= 0.0) return 0.0;
  return std::sqrt(r2) / (2.0 * std::numbers::pi * law.variance);
}

/// Symmetric PSD matrix over a finite index set, clipped to PSD on construction.
class CovMatrix {
 public:
  static constexpr double kEigenTolerance = 1e-10;

  explicit CovMatrix(linalg::Matrix gamma) : gamma_(std::move(gamma)) {
    if (!gamma_.square()) throw DomainError("covariance matrix must be square");
    if (!gamma_.is_symmetric()) throw DomainError("covariance matrix must be symmetric");
    if (gamma_.rows() == 0) throw DomainError("covariance matrix is empty");
    auto eig = linalg::symmetric_eigen(gamma_, true);
    min_eigenvalue_ = eig.values.front();
    if (min_eigenvalue_ < -kEigenTolerance)
      throw DomainError("covariance matrix is not positive semidefinite: minimum eigenvalue " +
                        std::to_string(min_eigenvalue_));
    if (min_eigenvalue_ < 0.0) {
      const std::size_t n = gamma_.rows();
      linalg::Matrix clipped(n, n);
      for (std::size_t c = 0; c < n; ++c) {
        const double lam = std::max(0.0, eig.values[c]);
        if (lam == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j)
            clipped(i, j) += lam * eig.vectors(i, c) * eig.vectors(j, c);
      }
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) clipped(i, j) = clipped(j, i);
      gamma_ = std::move(clipped);
    }
  }

  std::size_t size() const { return gamma_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return gamma_(i, j); }
  const linalg::Matrix& matrix() const { return gamma_; }
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  linalg::Matrix gamma_;
  double min_eigenvalue_ = 0.0;
};

/// Sum over non-crossing pairings pi of the word positions of
/// prod_{(a,b) in pi} gamma(word[a], word[b]). Indices are 0-based.
template <class Gamma>
double wick_joint_moment_with(const Gamma& gamma, const std::vector<int>& word) {
  const int len = static_cast<int>(word.size());
  if (len > kMaxWordLength)
    throw SizeError("wick word length " + std::to_string(len) + " exceeds " +
                    std::to_string(kMaxWordLength));
  if (len == 0) return 1.0;
  if (len % 2 != 0) return 0.0;
  const auto& pairings = combinat::cached_nc_pairings(len);
  CompensatedSum s;
  for (const auto& pairing : pairings) {
    double prod = 1.0;
    for (auto [a, b] : pairing) {
      prod *= gamma(word[a], word[b]);
      if (prod == 0.0) break;
    }
    s.add(prod);
  }
  return s.value();
}

inline double wick_joint_moment(const CovMatrix& gamma, const std::vector<int>& word) {
  for (int w : word)
    if (w < 0 || static_cast<std::size_t>(w) >= gamma.size())
      throw DomainError("wick word index " + std::to_string(w) + " out of range");
  return wick_joint_moment_with(
      [&](int i, int j) { return gamma(static_cast<std::size_t>(i), static_cast<std::size_t>(j)); },
      word);
}

/// m_n = sum_{pi in NC(n)} prod_{V in pi} kappa_{|V|}; kappa[0] is kappa_1.
inline double free_moment_from_cumulants(const std::vector<double>& kappa, int n) {
  if (n < 1 || n > kMaxCumulantOrder)
    throw DomainError("moment order must lie in [1, 12]");
  auto k_of = [&](std::size_t size) { return size <= kappa.size() ? kappa[size - 1] : 0.0; };
  CompensatedSum s;
  for (const auto& part : combinat::enumerate_nc(combinat::NCKind::Partition, n)) {
    double prod = 1.0;
    for (const auto& block : part.blocks) prod *= k_of(block.size());
    s.add(prod);
  }
  return s.value();
}

/// Moments m_1..m_n from cumulants kappa_1..(indexed from 0).
inline std::vector<double> free_moments_from_cumulants(const std::vector<double>& kappa, int n) {
  std::vector<double> m;
  for (int k = 1; k <= n; ++k) m.push_back(free_moment_from_cumulants(kappa, k));
  return m;
}

/// Inverse of free_moments_from_cumulants: kappa_k = m_k minus the contribution of
/// all non-crossing partitions of [k] with at least two blocks.
inline std::vector<double> cumulants_from_moments(const std::vector<double>& moments) {
  const int n = static_cast<int>(moments.size());
  if (n > kMaxCumulantOrder) throw DomainError("cumulant order must be at most 12");
  std::vector<double> kappa;
  for (int k = 1; k <= n; ++k) {
    kappa.push_back(0.0);
    const double without_top = free_moment_from_cumulants(kappa, k);
    kappa.back() = moments[k - 1] - without_top;
  }
  return kappa;
}

}  // namespace wignerlab::freecalc
