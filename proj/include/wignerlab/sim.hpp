#pragma once

// Monte Carlo simulators: the real symmetric matrix Brownian motion and its
// trace state, correlated semicircular families at matrix scale, asymptotic
// freeness statistics, and the free and classical limit theorems at desk scale.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <fftw3.h>

#include "covariance.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "moments.hpp"
#include "parallel.hpp"
#include "poly.hpp"
#include "rng.hpp"

namespace wignerlab::sim {

using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Replication statistics

struct SampleStats {
  double mean = 0.0;
  double stderr_ = 0.0;
  double rms = 0.0;
  std::size_t count = 0;
};

/// Ordered two-pass mean, standard error of the mean and root mean square.
inline SampleStats summarize(const std::vector<double>& xs) {
  SampleStats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  CompensatedSum sum, sq;
  for (double x : xs) {
    sum.add(x);
    sq.add(x * x);
  }
  const double n = static_cast<double>(xs.size());
  s.mean = sum.value() / n;
  s.rms = std::sqrt(sq.value() / n);
  if (xs.size() > 1) {
    CompensatedSum dev;
    for (double x : xs) dev.add((x - s.mean) * (x - s.mean));
    s.stderr_ = std::sqrt(dev.value() / (n - 1.0) / n);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Matrix Brownian motion

struct MatrixEnsembleConfig {
  std::size_t n = 300;
  std::vector<double> times{1.0};
  std::uint64_t seed = 42;
  std::size_t reps = 100;

  void validate() const {
    if (n < 2) throw DomainError("matrix dimension n must be at least 2");
    if (reps < 1) throw DomainError("reps must be at least 1");
    if (times.empty()) throw DomainError("times list is empty");
    if (!(times.front() >= 0.0)) throw DomainError("times must be non-negative");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw DomainError("times must be strictly increasing");
  }
};

inline constexpr std::uint64_t kBmDomain = 0xb40;
inline constexpr std::uint64_t kFamilyDomain = 0xfa3;
inline constexpr std::uint64_t kClassicalDomain = 0xc1a;

/// M_n(t_i), i = 1..k, for replication `rep`: A(t) has entries X_ij(t)/sqrt(n)
/// built from independent Gaussian increments and M = (A + A^T)/sqrt(2).
inline std::vector<Mat> matrix_bm_replication(const MatrixEnsembleConfig& config, std::size_t rep) {
  config.validate();
  const std::size_t n = config.n;
  const Eigen::Index N = static_cast<Eigen::Index>(n);
  std::vector<Mat> out;
  out.reserve(config.times.size());
  Mat A = Mat::Zero(N, N);
  double prev = 0.0;
  std::normal_distribution<double> normal;
  for (std::size_t ti = 0; ti < config.times.size(); ++ti) {
    const double sd = std::sqrt((config.times[ti] - prev) / static_cast<double>(n));
    prev = config.times[ti];
    for (std::size_t i = 0; i < n; ++i) {
      auto eng = rng::stream(config.seed ^ kBmDomain, rep, (static_cast<std::uint64_t>(ti) << 32) | i);
      for (std::size_t j = 0; j < n; ++j)
        A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += sd * normal(eng);
    }
    out.push_back((A + A.transpose()) / std::sqrt(2.0));
  }
  return out;
}

/// Per replication, the list M_n(t_1), ..., M_n(t_k).
inline std::vector<std::vector<Mat>> sample_matrix_bm(const MatrixEnsembleConfig& config) {
  config.validate();
  std::vector<std::vector<Mat>> out(config.reps);
  parallel_for(config.reps, [&](std::size_t r) { out[r] = matrix_bm_replication(config, r); });
  return out;
}

/// (1/n) Tr(M).
inline double trace_state(const Mat& m) {
  if (m.rows() != m.cols()) throw DomainError("trace state needs a square matrix");
  if (m.rows() == 0) throw DomainError("trace state of an empty matrix");
  return m.trace() / static_cast<double>(m.rows());
}

inline double trace_state(const linalg::Matrix& m) {
  if (!m.square()) throw DomainError("trace state needs a square matrix");
  if (m.rows() == 0) throw DomainError("trace state of an empty matrix");
  return linalg::trace(m) / static_cast<double>(m.rows());
}

/// (1/n) Tr(A B) without forming the product.
inline double trace_state_product(const Mat& a, const Mat& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
    throw DomainError("trace state needs square matrices of equal size");
  return a.cwiseProduct(b.transpose()).sum() / static_cast<double>(a.rows());
}

/// sum_d c_d M^d by Horner's rule.
inline Mat poly_of_matrix(const std::vector<double>& coeffs, const Mat& m) {
  const Eigen::Index n = m.rows();
  if (coeffs.empty()) return Mat::Zero(n, n);
  Mat acc = coeffs.back() * Mat::Identity(n, n);
  for (std::size_t d = coeffs.size() - 1; d-- > 0;) {
    Mat next = acc * m;
    next.diagonal().array() += coeffs[d];
    acc = std::move(next);
  }
  return acc;
}

/// Replication mean and stderr of tau_n(Q(M_n(t))) for monomial coefficients of Q.
inline moments::MomentResult estimate_poly_moment(const MatrixEnsembleConfig& config,
                                                  const std::vector<double>& poly, double t) {
  config.validate();
  const auto it = std::find(config.times.begin(), config.times.end(), t);
  if (it == config.times.end()) throw DomainError("t must be one of the configured times");
  const std::size_t idx = static_cast<std::size_t>(it - config.times.begin());
  std::vector<double> vals(config.reps);
  parallel_for(config.reps, [&](std::size_t r) {
    const auto ms = matrix_bm_replication(config, r);
    vals[r] = trace_state(poly_of_matrix(poly, ms[idx]));
  });
  const auto s = summarize(vals);
  moments::MomentResult out;
  out.value = s.mean;
  out.stderr_ = s.stderr_;
  out.n_samples = config.reps;
  out.seed = config.seed;
  out.method = moments::Method::MC;
  out.meta["n"] = std::to_string(config.n);
  out.meta["reps"] = std::to_string(config.reps);
  return out;
}

// ---------------------------------------------------------------------------
// Asymptotic freeness

struct FreenessResult {
  double value = 0.0;   // replication mean of the alternating product
  double stderr_ = 0.0;
  double rms = 0.0;     // root mean square of the per-replication products
  std::vector<double> centers;  // empirical tau_n(Q_j(increment)) that were subtracted
  std::size_t reps = 0;
};

/// tau_n(P_1 P_2 ... P_m) with P_j = Q_j(M(t_{i_j}) - M(t_{i_j - 1})) - c_j I, where c_j is the
/// replication mean of tau_n(Q_j(...)) and t_0 = 0. Consecutive increments must differ.
inline FreenessResult asymptotic_freeness_check(const MatrixEnsembleConfig& config,
                                                const std::vector<std::vector<double>>& polys,
                                                const std::vector<std::size_t>& increments) {
  config.validate();
  if (config.times.size() < 2) throw DomainError("freeness check needs at least two times");
  if (polys.empty() || polys.size() != increments.size())
    throw DomainError("need one increment index per polynomial");
  for (std::size_t j = 0; j < increments.size(); ++j) {
    if (increments[j] >= config.times.size())
      throw DomainError("increment index " + std::to_string(increments[j]) + " out of range");
    if (j > 0 && increments[j] == increments[j - 1])
      throw DomainError("consecutive factors must use distinct increments");
  }
  if (increments.size() > 1 && increments.front() == increments.back())
    throw DomainError("first and last factors must use distinct increments (cyclic alternation)");
  const std::size_t m = polys.size();
  auto factors = [&](std::size_t r) {
    const auto ms = matrix_bm_replication(config, r);
    std::vector<Mat> out;
    out.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t i = increments[j];
      const Mat inc = i == 0 ? ms[0] : Mat(ms[i] - ms[i - 1]);
      out.push_back(poly_of_matrix(polys[j], inc));
    }
    return out;
  };
  // Pass 1: empirical centers.
  std::vector<std::vector<double>> traces(config.reps);
  parallel_for(config.reps, [&](std::size_t r) {
    for (const auto& f : factors(r)) traces[r].push_back(trace_state(f));
  });
  FreenessResult res;
  res.reps = config.reps;
  res.centers.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> col;
    for (const auto& t : traces) col.push_back(t[j]);
    res.centers[j] = summarize(col).mean;
  }
  // Pass 2: alternating products of the centered factors (same streams).
  std::vector<double> prods(config.reps);
  parallel_for(config.reps, [&](std::size_t r) {
    auto fs = factors(r);
    for (std::size_t j = 0; j < m; ++j) fs[j].diagonal().array() -= res.centers[j];
    Mat acc = fs[0];
    for (std::size_t j = 1; j + 1 < m; ++j) acc = acc * fs[j];
    prods[r] = m == 1 ? trace_state(acc) : trace_state_product(acc, fs[m - 1]);
  });
  const auto s = summarize(prods);
  res.value = s.mean;
  res.stderr_ = s.stderr_;
  res.rms = s.rms;
  return res;
}

// ---------------------------------------------------------------------------
// Stationary Gaussian sequences

/// Factor C with C C^T = [rho(i - j)]_{i,j < m}: Cholesky when positive definite,
/// otherwise a clipped eigen-factor. A minimum eigenvalue below -1e-6 is rejected.
struct ToeplitzFactor {
  Mat C;
  bool triangular = true;
  double min_eigenvalue = 0.0;  // only computed on the fallback path
  std::string method;
};

inline constexpr double kIndefiniteTolerance = 1e-6;
inline constexpr double kClipTolerance = 1e-10;

inline ToeplitzFactor toeplitz_factor(const CovarianceModel& model, std::size_t m) {
  if (m < 1) throw DomainError("sequence length must be positive");
  const auto rho = model.lags(m);
  const Eigen::Index M = static_cast<Eigen::Index>(m);
  Mat T(M, M);
  for (Eigen::Index i = 0; i < M; ++i)
    for (Eigen::Index j = 0; j < M; ++j) T(i, j) = rho[static_cast<std::size_t>(std::abs(i - j))];
  ToeplitzFactor f;
  Eigen::LLT<Mat> llt(T);
  if (llt.info() == Eigen::Success) {
    f.C = llt.matrixL();
    f.method = "cholesky";
    return f;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(T);
  if (es.info() != Eigen::Success) throw NumericError("eigensolver failed on the Toeplitz matrix");
  f.min_eigenvalue = es.eigenvalues().minCoeff();
  if (f.min_eigenvalue < -kIndefiniteTolerance)
    throw DomainError("covariance model " + model.describe() +
                      " is not positive semidefinite on " + std::to_string(m) +
                      " lags: minimum eigenvalue " + std::to_string(f.min_eigenvalue));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  f.C = es.eigenvectors() * root.asDiagonal();
  f.triangular = false;
  f.method = "clipped-eigen";
  return f;
}

namespace detail {
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Exact sampler of a stationary Gaussian sequence of length n with correlation rho.
/// Uses circulant embedding through FFTW when the embedding is non-negative (after a
/// 1e-10 relative clip), and a Toeplitz factor otherwise.
class GaussianSequenceSampler {
 public:
  static constexpr std::size_t kMaxFactorSize = 4096;

  GaussianSequenceSampler(const CovarianceModel& model, std::size_t n) : n_(n) {
    if (n < 1) throw DomainError("sequence length must be positive");
    if (n == 1) {
      method_ = "direct";
      return;
    }
    std::size_t M = 1;
    while (M < 2 * (n - 1)) M <<= 1;
    for (int attempt = 0; attempt < 4; ++attempt, M <<= 1) {
      if (try_embedding(model, M)) return;
    }
    if (n > kMaxFactorSize)
      throw SizeError("circulant embedding is indefinite and n = " + std::to_string(n) +
                      " exceeds the Toeplitz factor limit " + std::to_string(kMaxFactorSize));
    factor_ = std::make_shared<ToeplitzFactor>(toeplitz_factor(model, n));
    method_ = "toeplitz-" + factor_->method;
  }

  ~GaussianSequenceSampler() {
    if (plan_) {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
  }
  GaussianSequenceSampler(const GaussianSequenceSampler&) = delete;
  GaussianSequenceSampler& operator=(const GaussianSequenceSampler&) = delete;

  const std::string& method() const { return method_; }
  std::size_t size() const { return n_; }

  /// One sample path into out (resized to n).
  void sample(rng::Engine& eng, std::vector<double>& out) const {
    out.resize(n_);
    std::normal_distribution<double> normal;
    if (method_ == "direct") {
      out[0] = normal(eng);
      return;
    }
    if (factor_) {
      const Eigen::Index N = static_cast<Eigen::Index>(n_);
      Eigen::VectorXd z(N);
      for (Eigen::Index i = 0; i < N; ++i) z(i) = normal(eng);
      const Eigen::VectorXd x = factor_->triangular
                                    ? Eigen::VectorXd(factor_->C.triangularView<Eigen::Lower>() * z)
                                    : Eigen::VectorXd(factor_->C * z);
      for (Eigen::Index i = 0; i < N; ++i) out[static_cast<std::size_t>(i)] = x(i);
      return;
    }
    const std::size_t M = scale_.size();
    fftw_complex* buf = fftw_alloc_complex(M);
    for (std::size_t j = 0; j < M; ++j) {
      buf[j][0] = scale_[j] * normal(eng);
      buf[j][1] = scale_[j] * normal(eng);
    }
    fftw_execute_dft(plan_, buf, buf);
    for (std::size_t k = 0; k < n_; ++k) out[k] = buf[k][0];
    fftw_free(buf);
  }

 private:
  bool try_embedding(const CovarianceModel& model, std::size_t M) {
    std::vector<double> c(M);
    for (std::size_t j = 0; j < M; ++j) c[j] = model(static_cast<long long>(std::min(j, M - j)));
    fftw_complex* buf = fftw_alloc_complex(M);
    for (std::size_t j = 0; j < M; ++j) {
      buf[j][0] = c[j];
      buf[j][1] = 0.0;
    }
    fftw_plan plan;
    {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      plan = fftw_plan_dft_1d(static_cast<int>(M), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    double max_abs = 0.0, min_val = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      max_abs = std::max(max_abs, std::abs(buf[j][0]));
      min_val = std::min(min_val, buf[j][0]);
    }
    if (min_val < -kClipTolerance * max_abs) {
      std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(plan);
      fftw_free(buf);
      return false;
    }
    scale_.resize(M);
    for (std::size_t j = 0; j < M; ++j)
      scale_[j] = std::sqrt(std::max(0.0, buf[j][0]) / static_cast<double>(M));
    fftw_free(buf);
    plan_ = plan;  // in-place plan; reused with fftw_execute_dft on fresh aligned buffers
    method_ = "circulant-" + std::to_string(M);
    return true;
  }

  std::size_t n_;
  std::string method_;
  std::vector<double> scale_;
  fftw_plan plan_ = nullptr;
  std::shared_ptr<ToeplitzFactor> factor_;
};

// ---------------------------------------------------------------------------
// Correlated semicircular families

struct CorrelatedFamilyConfig {
  std::size_t m = 10;  // window: number of sequence elements
  CovarianceModel model = CovarianceModel::delta();
  std::size_t matrix_n = 200;
  std::uint64_t seed = 42;
  std::size_t reps = 100;

  void validate() const {
    if (m < 1) throw DomainError("window m must be positive");
    if (matrix_n < 2) throw DomainError("matrix_n must be at least 2");
    if (reps < 1) throw DomainError("reps must be at least 1");
  }
};

inline constexpr double kMaxFamilyEntries = 6e7;

namespace detail {
/// Z(j, e): independent Gaussian matrix entries of W_j at t = 1 (upper triangle,
/// diagonal variance 2/n, off-diagonal 1/n) for replication rep.
inline Mat family_innovations(const CorrelatedFamilyConfig& cfg, std::size_t rep) {
  const std::size_t n = cfg.matrix_n;
  const std::size_t E = n * (n + 1) / 2;
  if (static_cast<double>(cfg.m) * static_cast<double>(E) > kMaxFamilyEntries)
    throw SizeError("correlated family of " + std::to_string(cfg.m) + " matrices of size " +
                    std::to_string(n) + " exceeds the memory budget");
  Mat Z(static_cast<Eigen::Index>(cfg.m), static_cast<Eigen::Index>(E));
  const double off = 1.0 / std::sqrt(static_cast<double>(n));
  const double diag = std::sqrt(2.0) * off;
  std::normal_distribution<double> normal;
  for (std::size_t j = 0; j < cfg.m; ++j) {
    auto eng = rng::stream(cfg.seed ^ kFamilyDomain, rep, j);
    Eigen::Index e = 0;
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = a; b < n; ++b, ++e)
        Z(static_cast<Eigen::Index>(j), e) = (a == b ? diag : off) * normal(eng);
  }
  return Z;
}

inline Mat unpack_symmetric(const Eigen::Ref<const Eigen::RowVectorXd>& row, std::size_t n) {
  const Eigen::Index N = static_cast<Eigen::Index>(n);
  Mat X(N, N);
  Eigen::Index e = 0;
  for (Eigen::Index a = 0; a < N; ++a)
    for (Eigen::Index b = a; b < N; ++b, ++e) X(a, b) = X(b, a) = row(e);
  return X;
}

/// Calls visit(k, X_k) for k = 0..m-1 in order, generating rows of C Z in chunks.
template <class Visit>
void for_each_family_member(const CorrelatedFamilyConfig& cfg, const ToeplitzFactor& factor,
                            std::size_t rep, Visit&& visit) {
  const Mat Z = family_innovations(cfg, rep);
  const Eigen::Index M = static_cast<Eigen::Index>(cfg.m);
  constexpr Eigen::Index kChunk = 32;
  for (Eigen::Index k0 = 0; k0 < M; k0 += kChunk) {
    const Eigen::Index rows = std::min(kChunk, M - k0);
    const Eigen::Index inner = factor.triangular ? k0 + rows : M;
    const Mat X = factor.C.block(k0, 0, rows, inner) * Z.topRows(inner);
    for (Eigen::Index r = 0; r < rows; ++r)
      visit(static_cast<std::size_t>(k0 + r), unpack_symmetric(X.row(r), cfg.matrix_n));
  }
}
}  // namespace detail

/// Per replication, X_1..X_m with X_k = sum_j C_kj W_j, C C^T = [rho(i - j)] and W_j
/// independent matrix Brownian motions at t = 1.
inline std::vector<std::vector<Mat>> sample_correlated_family(const CorrelatedFamilyConfig& cfg) {
  cfg.validate();
  const auto factor = toeplitz_factor(cfg.model, cfg.m);
  std::vector<std::vector<Mat>> out(cfg.reps);
  parallel_for(cfg.reps, [&](std::size_t r) {
    out[r].resize(cfg.m);
    detail::for_each_family_member(cfg, factor, r,
                                   [&](std::size_t k, Mat x) { out[r][k] = std::move(x); });
  });
  return out;
}

/// Empirical Gram matrix tau_n(X_k X_l) per replication, k, l < m.
inline std::vector<Mat> family_gram(const CorrelatedFamilyConfig& cfg) {
  cfg.validate();
  const auto factor = toeplitz_factor(cfg.model, cfg.m);
  std::vector<Mat> out(cfg.reps);
  parallel_for(cfg.reps, [&](std::size_t r) {
    std::vector<Mat> xs(cfg.m);
    detail::for_each_family_member(cfg, factor, r, [&](std::size_t k, Mat x) { xs[k] = std::move(x); });
    const Eigen::Index M = static_cast<Eigen::Index>(cfg.m);
    out[r] = Mat(M, M);
    for (Eigen::Index k = 0; k < M; ++k)
      for (Eigen::Index l = k; l < M; ++l)
        out[r](k, l) = out[r](l, k) = trace_state_product(xs[static_cast<std::size_t>(k)],
                                                          xs[static_cast<std::size_t>(l)]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Limit theorems

enum class LimitKind { Free, Classical };
enum class Normalization { Auto, Clt, Nclt };

inline const char* to_string(LimitKind k) { return k == LimitKind::Free ? "free" : "classical"; }
inline const char* to_string(Normalization n) {
  switch (n) {
    case Normalization::Auto: return "auto";
    case Normalization::Clt: return "clt";
    case Normalization::Nclt: return "nclt";
  }
  return "auto";
}

struct LimitsConfig {
  LimitKind kind = LimitKind::Free;
  poly::TchebExpansion expansion = poly::single_term(poly::Basis::Tchebycheff, 2);
  CovarianceModel model = CovarianceModel::geometric(0.5);
  std::size_t n_time = 1000;
  std::size_t matrix_n = 200;  // ignored by the classical simulator
  std::size_t reps = 50;
  std::vector<double> t_list{1.0};
  std::uint64_t seed = 7;
  Normalization normalization = Normalization::Auto;
  std::size_t limit_samples = 200000;  // MC samples for the fourth-moment limit reference
};

struct LimitRow {
  std::string quantity;
  double empirical = 0.0;
  double stderr_ = 0.0;
  std::optional<double> reference;
};

struct LimitsResult {
  std::vector<LimitRow> rows;
  Normalization regime = Normalization::Clt;
  double normalization = 1.0;
  std::map<std::string, std::string> meta;
};

/// Regime of expansion (rank q) under model: NCLT when rho is a power law with qD < 1.
inline Normalization regime_of(const poly::TchebExpansion& e, const CovarianceModel& model) {
  if (!e.rank) throw DomainError("expansion has no term of degree >= 1");
  const int q = static_cast<int>(*e.rank);
  if (const auto* pl = std::get_if<CovarianceModel::PowerLaw>(&model.variant())) {
    if (q * pl->D < 1.0) return Normalization::Nclt;
    if (q * pl->D == 1.0)
      throw DomainError("qD = 1 is the boundary case; neither normalization applies");
  }
  return Normalization::Clt;
}

namespace detail {
inline std::string fmt_t(double t) {
  std::ostringstream os;
  os.precision(17);
  os << t;
  return os.str();
}

/// E tau_n((V - tau_n(V))^2) / sum_{k,l} rho(k-l)^s for V = sum_k U_s(X_k) over the
/// real symmetric family at matrix size n (Wick calculus with E X_ij X_kl = (d_il d_jk + d_ik d_jl)/n).
inline double trace_centered_factor(int s, std::size_t matrix_n) {
  const double n = static_cast<double>(matrix_n);
  if (s == 1) return 1.0 + 1.0 / n - 2.0 / (n * n);
  if (s == 2) return 1.0 + 3.0 / n - 4.0 / (n * n * n);
  throw DomainError("finite-matrix factor is only derived for degrees 1 and 2");
}

inline std::vector<std::size_t> checkpoints(const std::vector<double>& t_list, std::size_t n) {
  std::vector<std::size_t> out;
  for (double t : t_list) {
    if (!(t > 0.0)) throw DomainError("times must be positive");
    const long long N = moments::lattice_size(static_cast<long long>(n), t);
    if (N < 1) throw DomainError("[n t] must be at least 1");
    out.push_back(static_cast<std::size_t>(N));
  }
  return out;
}
}  // namespace detail

/// Empirical normalized second and fourth moments of V_n(Q, t) (free: trace state of the
/// matrix sums; classical: sample averages of W_n(Q, t)) with their references.
inline LimitsResult simulate_limits(const LimitsConfig& cfg) {
  if (cfg.reps < 2) throw DomainError("reps must be at least 2");
  if (cfg.n_time < 1) throw DomainError("n_time must be positive");
  if (cfg.t_list.empty()) throw DomainError("empty t list");
  // The constant term only shifts the mean; the fluctuation uses degrees >= 1.
  poly::TchebExpansion e = cfg.expansion;
  if (!e.coeffs.empty()) e.coeffs[0] = 0.0;
  const auto want_basis = cfg.kind == LimitKind::Free ? poly::Basis::Tchebycheff : poly::Basis::Hermite;
  if (e.basis != want_basis)
    throw DomainError(std::string(to_string(cfg.kind)) + " simulation needs a " +
                      (cfg.kind == LimitKind::Free ? "Tchebycheff" : "Hermite") + " expansion");
  const Normalization regime = regime_of(e, cfg.model);
  if (cfg.normalization != Normalization::Auto && cfg.normalization != regime)
    throw DomainError(std::string(to_string(cfg.normalization)) +
                      " normalization does not match the model's regime (" + to_string(regime) + ")");
  const int q = static_cast<int>(*e.rank);
  const auto checkpoints = detail::checkpoints(cfg.t_list, cfg.n_time);
  const std::size_t N = *std::max_element(checkpoints.begin(), checkpoints.end());

  LimitsResult res;
  res.regime = regime;
  double norm = 0.0, H = 0.5, limit_coeff = 0.0;
  if (regime == Normalization::Nclt) {
    const auto& pl = std::get<CovarianceModel::PowerLaw>(cfg.model.variant());
    const auto c = moments::nclt_constants(q, pl.D, pl.L, static_cast<long long>(cfg.n_time), e.coeff(q));
    norm = c.normalization;
    H = c.H;
    limit_coeff = c.limit_coeff;
  } else {
    norm = std::sqrt(static_cast<double>(cfg.n_time));
  }
  res.normalization = norm;

  // Per replication: second and fourth moments at every checkpoint.
  const std::size_t T = checkpoints.size();
  std::vector<std::vector<double>> m2(cfg.reps, std::vector<double>(T)), m4 = m2;
  if (cfg.kind == LimitKind::Free) {
    CorrelatedFamilyConfig fc;
    fc.m = N;
    fc.model = cfg.model;
    fc.matrix_n = cfg.matrix_n;
    fc.seed = cfg.seed;
    fc.reps = cfg.reps;
    fc.validate();
    const auto factor = toeplitz_factor(cfg.model, N);
    res.meta["sequence_factor"] = factor.method;
    const auto mono = poly::reconstruct(e);
    parallel_for(cfg.reps, [&](std::size_t r) {
      const Eigen::Index n = static_cast<Eigen::Index>(cfg.matrix_n);
      Mat S = Mat::Zero(n, n);
      detail::for_each_family_member(fc, factor, r, [&](std::size_t k, const Mat& x) {
        S += poly_of_matrix(mono, x);
        for (std::size_t c = 0; c < T; ++c) {
          if (checkpoints[c] != k + 1) continue;
          // Centre by the trace: tau_n(X^2) = 1 + 1/n for this ensemble, so the
          // uncentred sum drifts by about n_time / matrix_n.
          Mat V = S / norm;
          V.diagonal().array() -= trace_state(V);
          const Mat V2 = V * V;
          m2[r][c] = trace_state(V2);
          m4[r][c] = trace_state_product(V2, V2);
        }
      });
    });
  } else {
    const GaussianSequenceSampler sampler(cfg.model, N);
    res.meta["sequence_sampler"] = sampler.method();
    parallel_for(cfg.reps, [&](std::size_t r) {
      auto eng = rng::stream(cfg.seed ^ kClassicalDomain, r);
      std::vector<double> x;
      sampler.sample(eng, x);
      CompensatedSum S;
      std::size_t c_done = 0;
      for (std::size_t k = 0; k < N && c_done < T; ++k) {
        S.add(poly::eval(e, x[k]));
        for (std::size_t c = 0; c < T; ++c) {
          if (checkpoints[c] != k + 1) continue;
          const double v = S.value() / norm;
          m2[r][c] = v * v;
          m4[r][c] = v * v * v * v;
          ++c_done;
        }
      }
    });
  }

  // References.
  const bool is_free = cfg.kind == LimitKind::Free;
  std::optional<double> clt_limit;
  if (regime == Normalization::Clt) {
    const auto cv = moments::clt_variance(e, cfg.model);
    clt_limit = is_free ? cv.free_value : cv.classical_value;
  }
  std::optional<double> nclt_m4_base;
  if (regime == Normalization::Nclt) {
    if (is_free || q == 1) {
      moments::LimitMethod lm;
      lm.samples = cfg.limit_samples;
      lm.seed = cfg.seed;
      if (q == 1) {
        nclt_m4_base = is_free ? 2.0 : 3.0;  // semicircular / Gaussian fBm at t = 1
      } else {
        nclt_m4_base = moments::limit_joint_moment(q, H, {1.0, 1.0, 1.0, 1.0}, lm).value;
      }
    }
  }
  for (std::size_t c = 0; c < T; ++c) {
    const double t = cfg.t_list[c];
    // Finite-n second moment: orthogonal degrees add, classical terms carry s!.
    CompensatedSum exact2, matrix2;
    const bool matrix_ref = is_free && e.coeffs.size() <= 3;
    double fact = 1.0;
    for (std::size_t s = 1; s < e.coeffs.size(); ++s) {
      fact *= static_cast<double>(s);
      const double a = e.coeffs[s];
      if (a == 0.0) continue;
      const auto ex = moments::exact_joint_moment({static_cast<int>(s), static_cast<int>(s)}, {t, t},
                                                  static_cast<long long>(cfg.n_time), cfg.model);
      exact2.add((is_free ? 1.0 : fact) * a * a * ex.value);
      if (matrix_ref)
        matrix2.add(detail::trace_centered_factor(static_cast<int>(s), cfg.matrix_n) * a * a * ex.value);
    }
    const double ref2 = exact2.value() / (norm * norm);
    std::vector<double> col2, col4;
    for (std::size_t r = 0; r < cfg.reps; ++r) {
      col2.push_back(m2[r][c]);
      col4.push_back(m4[r][c]);
    }
    const auto s2 = summarize(col2), s4 = summarize(col4);
    const std::string tag = "(t=" + detail::fmt_t(t) + ")";
    res.rows.push_back({"m2" + tag, s2.mean, s2.stderr_, ref2});
    if (matrix_ref)
      res.rows.push_back({"m2_finite_matrix" + tag, s2.mean, s2.stderr_, matrix2.value() / (norm * norm)});
    std::optional<double> ref4;
    double lim2 = 0.0;
    if (regime == Normalization::Clt) {
      lim2 = *clt_limit * t;
      ref4 = (is_free ? 2.0 : 3.0) * lim2 * lim2;
    } else {
      const double fac = is_free ? 1.0 : std::tgamma(q + 1.0);
      lim2 = fac * limit_coeff * limit_coeff * std::pow(t, 2.0 * H);
      if (nclt_m4_base)
        ref4 = (is_free ? 1.0 : fac * fac) * std::pow(limit_coeff, 4) * std::pow(t, 4.0 * H) * *nclt_m4_base;
    }
    res.rows.push_back({"m2_limit" + tag, s2.mean, s2.stderr_, lim2});
    res.rows.push_back({"m4" + tag, s4.mean, s4.stderr_, ref4});
  }
  res.meta["kind"] = to_string(cfg.kind);
  res.meta["regime"] = to_string(regime);
  res.meta["model"] = cfg.model.describe();
  res.meta["n_time"] = std::to_string(cfg.n_time);
  if (is_free) {
    res.meta["matrix_n"] = std::to_string(cfg.matrix_n);
    res.meta["centering"] = "trace";
    res.meta["scale_choice"] = "empirical (no rate is known for matrix_n versus n_time)";
  }
  res.meta["reps"] = std::to_string(cfg.reps);
  res.meta["seed"] = std::to_string(cfg.seed);
  res.meta["normalization"] = detail::fmt_t(norm);
  return res;
}

}  // namespace wignerlab::sim
