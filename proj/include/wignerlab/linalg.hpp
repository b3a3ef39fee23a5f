#pragma once

// Small dense linear algebra: row-major matrices, blocked products, a cyclic
// Jacobi eigensolver for symmetric matrices and a clipped Cholesky factor.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "parallel.hpp"

namespace wignerlab::linalg {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* ptr(std::size_t i, std::size_t j) { return data_.data() + i * cols_ + j; }
  const double* ptr(std::size_t i, std::size_t j) const { return data_.data() + i * cols_ + j; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Matrix& operator+=(const Matrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }
  void add_scaled(const Matrix& o, double s) {
    assert(rows_ == o.rows_ && cols_ == o.cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += s * o.data_[k];
  }
  void add_identity(double s) {
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) (*this)(i, i) += s;
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  bool is_symmetric() const {
    if (!square()) return false;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j)
        if ((*this)(i, j) != (*this)(j, i)) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// C = A * B, parallel over row blocks of A.
inline Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DomainError("matrix product: inner dimensions differ");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix c(n, m);
  constexpr std::size_t kRowBlock = 32;
  constexpr std::size_t kInnerBlock = 256;
  const std::size_t n_blocks = (n + kRowBlock - 1) / kRowBlock;
  parallel_for(n_blocks, [&](std::size_t blk) {
    const std::size_t i0 = blk * kRowBlock, i1 = std::min(n, i0 + kRowBlock);
    for (std::size_t p0 = 0; p0 < k; p0 += kInnerBlock) {
      const std::size_t p1 = std::min(k, p0 + kInnerBlock);
      for (std::size_t i = i0; i < i1; ++i) {
        double* ci = &c(i, 0);
        for (std::size_t p = p0; p < p1; ++p) {
          const double aip = a(i, p);
          if (aip == 0.0) continue;
          const double* bp = b.ptr(p, 0);
          for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
        }
      }
    }
  });
  return c;
}

/// A * A^T for a tall factor; result is exactly symmetric.
inline Matrix gram_rows(const Matrix& a) {
  const std::size_t n = a.rows(), k = a.cols();
  Matrix c(n, n);
  parallel_for(n, [&](std::size_t i) {
    const double* ai = a.ptr(i, 0);
    for (std::size_t j = i; j < n; ++j) {
      const double* aj = a.ptr(j, 0);
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * aj[p];
      c(i, j) = s;
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) c(i, j) = c(j, i);
  return c;
}

inline double trace(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(a.rows(), a.cols()); ++i) s += a(i, i);
  return s;
}

/// Tr(A B) for symmetric B, computed as sum_ij A_ij B_ij without forming A B.
inline double trace_of_product_symmetric(const Matrix& a, const Matrix& b) {
  CompensatedSum s;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) row += a(i, j) * b(i, j);
    s.add(row);
  }
  return s.value();
}

inline double frobenius_norm_sq(const Matrix& a) { return trace_of_product_symmetric(a, a); }

struct EigenResult {
  std::vector<double> values;  // ascending
  Matrix vectors;              // columns are eigenvectors (empty unless requested)
  int sweeps = 0;
};

/// Cyclic Jacobi rotations on a symmetric matrix. Stops once the off-diagonal
/// Frobenius norm drops below tol * ||A||_F; throws NumericError after max_sweeps.
inline EigenResult jacobi_eigen(Matrix a, bool want_vectors = false, double tol = 1e-12,
                                int max_sweeps = 100) {
  if (!a.square()) throw DomainError("jacobi_eigen: matrix is not square");
  const std::size_t n = a.rows();
  EigenResult out;
  if (want_vectors) out.vectors = Matrix::identity(n);
  const double scale = std::sqrt(frobenius_norm_sq(a));
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };
  if (scale == 0.0 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out.values.push_back(a(i, i));
    std::sort(out.values.begin(), out.values.end());
    return out;
  }
  const double target = tol * scale;
  std::vector<double> rp(n), rq(n);
  int sweep = 0;
  for (; sweep < max_sweeps; ++sweep) {
    const double off = off_norm();
    if (off <= target) break;
    // Skip rotations whose pivot is negligible relative to the current off-norm.
    const double skip = 1e-3 * off / static_cast<double>(n);
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= std::min(skip, target / static_cast<double>(n))) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        double* ap = &a(p, 0);
        double* aq = &a(q, 0);
        for (std::size_t k = 0; k < n; ++k) {
          const double x = ap[k], y = aq[k];
          rp[k] = c * x - s * y;
          rq[k] = s * x + c * y;
        }
        rp[p] = app - t * apq;
        rq[q] = aqq + t * apq;
        rp[q] = 0.0;
        rq[p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          ap[k] = rp[k];
          aq[k] = rq[k];
          a(k, p) = rp[k];
          a(k, q) = rq[k];
        }
        if (want_vectors) {
          Matrix& v = out.vectors;
          for (std::size_t k = 0; k < n; ++k) {
            const double x = v(k, p), y = v(k, q);
            v(k, p) = c * x - s * y;
            v(k, q) = s * x + c * y;
          }
        }
      }
    }
  }
  if (off_norm() > target)
    throw NumericError("jacobi_eigen: no convergence after " + std::to_string(sweep) + " sweeps",
                       sweep);
  out.sweeps = sweep;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) < a(y, y); });
  for (std::size_t i : order) out.values.push_back(a(i, i));
  if (want_vectors) {
    Matrix sorted(n, n);
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t r = 0; r < n; ++r) sorted(r, c) = out.vectors(r, order[c]);
    out.vectors = std::move(sorted);
  }
  return out;
}

inline constexpr std::size_t kJacobiMaxSize = 256;

/// Eigenvalues (ascending) of a symmetric matrix: cyclic Jacobi up to
/// kJacobiMaxSize, Householder tridiagonalisation with implicit QL above.
inline EigenResult symmetric_eigen(const Matrix& a, bool want_vectors = false) {
  if (!a.square()) throw DomainError("symmetric_eigen: matrix is not square");
  if (a.rows() <= kJacobiMaxSize) return jacobi_eigen(a, want_vectors);
  const std::size_t n = a.rows();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> view(
      a.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      view, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw NumericError("symmetric eigensolver did not converge", 0);
  EigenResult out;
  out.values.assign(solver.eigenvalues().data(), solver.eigenvalues().data() + n);
  if (want_vectors) {
    out.vectors = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out.vectors(i, j) = solver.eigenvectors()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return out;
}

/// Lower-triangular L with L L^T = A; false if a pivot is not positive.
inline bool try_cholesky(const Matrix& a, Matrix& lower) {
  const std::size_t n = a.rows();
  lower = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
    if (!(d > 0.0)) return false;
    const double ljj = std::sqrt(d);
    lower(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      const double* li = lower.ptr(i, 0);
      const double* lj = lower.ptr(j, 0);
      for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
      lower(i, j) = s / ljj;
    }
  }
  return true;
}

struct PsdFactor {
  Matrix factor;            // F with F F^T equal to the (clipped) input
  double min_eigenvalue;    // before clipping; +inf when Cholesky succeeded directly
  bool clipped = false;
};

/// Factor a symmetric matrix that may be marginally indefinite. Eigenvalues below
/// -reject_below raise DomainError; the rest are clipped at zero.
inline PsdFactor psd_factor(const Matrix& a, double reject_below) {
  PsdFactor out;
  if (try_cholesky(a, out.factor)) {
    out.min_eigenvalue = HUGE_VAL;
    return out;
  }
  EigenResult eig = symmetric_eigen(a, true);
  out.min_eigenvalue = eig.values.front();
  if (out.min_eigenvalue < -reject_below)
    throw DomainError("matrix is indefinite: minimum eigenvalue " +
                      std::to_string(out.min_eigenvalue));
  const std::size_t n = a.rows();
  out.factor = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    const double root = std::sqrt(std::max(0.0, eig.values[c]));
    for (std::size_t r = 0; r < n; ++r) out.factor(r, c) = eig.vectors(r, c) * root;
  }
  out.clipped = true;
  return out;
}

}  // namespace wignerlab::linalg
