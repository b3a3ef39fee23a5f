#pragma once

// Joint moments of sums of Tchebycheff polynomials of a stationary semicircular
// sequence: exact finite-n lattice sums, moments of the limiting Tchebycheff
// process, CLT variances, and the normalisations of the non-central limit.

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "combinat.hpp"
#include "covariance.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "poly.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace wignerlab::moments {

enum class Method { Exact, MC, Quadrature };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Exact: return "exact";
    case Method::MC: return "mc";
    case Method::Quadrature: return "quadrature";
  }
  return "unknown";
}

struct MomentResult {
  double value = 0.0;
  std::optional<double> stderr_;  // present iff method == MC
  std::optional<std::uint64_t> n_samples;
  std::optional<std::uint64_t> seed;
  Method method = Method::Exact;
  std::map<std::string, std::string> meta;
};

/// [n t] with a small guard against t values like 0.3 that are not exact in binary.
inline long long lattice_size(long long n, double t) {
  return static_cast<long long>(std::floor(static_cast<double>(n) * t + 1e-9));
}

// ---------------------------------------------------------------------------
// Exact lattice sums

enum class LatticePath { Auto, Toeplitz, Direct, Elimination };

struct ExactOptions {
  double budget = 1e9;  // maximum number of elementary terms of the chosen path
  LatticePath path = LatticePath::Auto;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// pw[a][d] = rho(d)^a for a = 0..max_alpha, d = 0..max_lag.
inline std::vector<std::vector<double>> power_table(const CovarianceModel& model, int max_alpha,
                                                    long long max_lag) {
  const auto base = model.lags(static_cast<std::size_t>(max_lag) + 1);
  std::vector<std::vector<double>> pw(max_alpha + 1, std::vector<double>(base.size(), 1.0));
  for (int a = 1; a <= max_alpha; ++a)
    for (std::size_t d = 0; d < base.size(); ++d) pw[a][d] = pw[a - 1][d] * base[d];
  return pw;
}

/// Number of (k, l) in [1..n1] x [1..n2] with k - l = d.
inline long long lag_count(long long n1, long long n2, long long d) {
  const long long lo = std::max(1LL, 1 + d), hi = std::min(n1, n2 + d);
  return std::max(0LL, hi - lo + 1);
}

struct Edge {
  int i, j, alpha;
};

inline std::vector<Edge> edges_of(const combinat::AlphaMatrix& alpha) {
  std::vector<Edge> out;
  for (int i = 0; i < alpha.p(); ++i)
    for (int j = i + 1; j < alpha.p(); ++j)
      if (alpha(i, j) > 0) out.push_back({i, j, alpha(i, j)});
  return out;
}

/// Dense factor over a sorted list of variables; data is row-major in that order.
struct Factor {
  std::vector<int> vars;
  std::vector<double> data;
};

/// Greedy min-fill elimination order and its cost (multiply-adds).
inline double elimination_plan(int p, const std::vector<Edge>& edges,
                               const std::vector<long long>& dims, std::vector<int>& order) {
  std::vector<std::vector<bool>> adj(p, std::vector<bool>(p, false));
  for (const auto& e : edges) adj[e.i][e.j] = adj[e.j][e.i] = true;
  std::vector<bool> done(p, false);
  double cost = 0.0;
  order.clear();
  for (int step = 0; step < p; ++step) {
    int best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int v = 0; v < p; ++v) {
      if (done[v]) continue;
      double c = static_cast<double>(dims[v]);
      for (int u = 0; u < p; ++u)
        if (!done[u] && u != v && adj[v][u]) c *= static_cast<double>(dims[u]);
      if (c < best_cost) {
        best_cost = c;
        best = v;
      }
    }
    order.push_back(best);
    cost += best_cost;
    std::vector<int> nb;
    for (int u = 0; u < p; ++u)
      if (!done[u] && u != best && adj[best][u]) nb.push_back(u);
    for (int a : nb)
      for (int b : nb)
        if (a != b) adj[a][b] = true;
    done[best] = true;
  }
  return cost;
}

/// Sum over k in prod [1..dims[i]] of prod_edges pw[alpha][|k_i - k_j|] by variable elimination.
inline double eliminate(int p, const std::vector<Edge>& edges, const std::vector<long long>& dims,
                        const std::vector<std::vector<double>>& pw) {
  std::vector<int> order;
  elimination_plan(p, edges, dims, order);
  std::vector<Factor> factors;
  for (const auto& e : edges) {
    Factor f;
    f.vars = {e.i, e.j};
    const long long ni = dims[e.i], nj = dims[e.j];
    f.data.resize(static_cast<std::size_t>(ni * nj));
    for (long long a = 0; a < ni; ++a)
      for (long long b = 0; b < nj; ++b)
        f.data[static_cast<std::size_t>(a * nj + b)] = pw[e.alpha][std::llabs(a - b)];
    factors.push_back(std::move(f));
  }
  double scalar = 1.0;
  for (int v : order) {
    std::vector<Factor> touching, rest;
    for (auto& f : factors)
      (std::find(f.vars.begin(), f.vars.end(), v) != f.vars.end() ? touching : rest)
          .push_back(std::move(f));
    if (touching.empty()) {
      scalar *= static_cast<double>(dims[v]);
      factors = std::move(rest);
      continue;
    }
    std::vector<int> out_vars;
    for (const auto& f : touching)
      for (int u : f.vars)
        if (u != v) out_vars.push_back(u);
    std::sort(out_vars.begin(), out_vars.end());
    out_vars.erase(std::unique(out_vars.begin(), out_vars.end()), out_vars.end());
    long long out_size = 1;
    for (int u : out_vars) out_size *= dims[u];
    // Strides of each touching factor with respect to (out_vars..., v).
    struct Access {
      const Factor* f;
      std::vector<long long> out_stride;  // per out var
      long long v_stride;
    };
    std::vector<Access> acc;
    for (const auto& f : touching) {
      Access a{&f, std::vector<long long>(out_vars.size(), 0), 0};
      long long stride = 1;
      for (std::size_t k = f.vars.size(); k-- > 0;) {
        const int u = f.vars[k];
        if (u == v)
          a.v_stride = stride;
        else
          a.out_stride[std::lower_bound(out_vars.begin(), out_vars.end(), u) - out_vars.begin()] =
              stride;
        stride *= dims[u];
      }
      acc.push_back(std::move(a));
    }
    Factor nf;
    nf.vars = out_vars;
    nf.data.assign(static_cast<std::size_t>(out_size), 0.0);
    const long long nv = dims[v];
    parallel_for(static_cast<std::size_t>(out_size), [&](std::size_t idx) {
      // decode idx into out var values (row-major, last var fastest)
      std::vector<long long> base(acc.size(), 0);
      long long rem = static_cast<long long>(idx);
      for (std::size_t k = out_vars.size(); k-- > 0;) {
        const long long d = dims[out_vars[k]];
        const long long val = rem % d;
        rem /= d;
        for (std::size_t a = 0; a < acc.size(); ++a) base[a] += val * acc[a].out_stride[k];
      }
      double s = 0.0;
      for (long long kv = 0; kv < nv; ++kv) {
        double prod = 1.0;
        for (std::size_t a = 0; a < acc.size(); ++a)
          prod *= acc[a].f->data[static_cast<std::size_t>(base[a] + kv * acc[a].v_stride)];
        s += prod;
      }
      nf.data[idx] = s;
    });
    rest.push_back(std::move(nf));
    factors = std::move(rest);
  }
  for (const auto& f : factors) {
    // remaining factors have no variables
    scalar *= f.data.empty() ? 1.0 : f.data[0];
  }
  return scalar;
}

/// Direct enumeration over the lattice; calls visit(k, weight) and sums weight.
/// Parallel over k_0 with per-slice compensated sums reduced in order.
template <class Term>
double direct_sum(const std::vector<long long>& dims, Term&& term) {
  const int p = static_cast<int>(dims.size());
  std::vector<double> slices(static_cast<std::size_t>(dims[0]), 0.0);
  parallel_for(static_cast<std::size_t>(dims[0]), [&](std::size_t k0) {
    std::vector<long long> k(p, 0);
    k[0] = static_cast<long long>(k0);
    CompensatedSum s;
    for (;;) {
      s.add(term(k));
      int i = p - 1;
      while (i >= 1 && ++k[i] == dims[i]) k[i--] = 0;
      if (i < 1) break;
    }
    slices[k0] = s.value();
  });
  CompensatedSum total;
  for (double v : slices) total.add(v);
  return total.value();
}

}  // namespace detail

/// Sum over k_i <= [n t_i] of sum over r in B(q) of prod_{i<j} rho(k_i - k_j)^alpha_ij(r).
inline MomentResult exact_joint_moment(const std::vector<int>& q_list,
                                       const std::vector<double>& t_list, long long n,
                                       const CovarianceModel& model,
                                       const ExactOptions& opts = {}) {
  if (q_list.size() != t_list.size())
    throw DomainError("q and t lists must have the same length");
  if (n < 1) throw DomainError("n must be positive");
  for (double t : t_list)
    if (!(t > 0.0)) throw DomainError("times must be positive");
  const combinat::BlockProfile profile(q_list);
  const int p = profile.p();
  MomentResult out;
  out.method = Method::Exact;
  out.meta["model"] = model.describe();
  out.meta["n"] = std::to_string(n);
  if (profile.total() % 2 != 0) {
    out.meta["path"] = "odd-degree";
    return out;
  }
  std::vector<long long> dims(p);
  for (int i = 0; i < p; ++i) dims[i] = lattice_size(n, t_list[i]);
  const auto contractions = combinat::enumerate_contractions(profile, true);
  out.meta["contractions"] = std::to_string(contractions.size());
  if (contractions.empty() ||
      std::any_of(dims.begin(), dims.end(), [](long long d) { return d <= 0; })) {
    out.meta["path"] = "empty";
    return out;
  }
  const long long max_dim = *std::max_element(dims.begin(), dims.end());
  int max_alpha = 0;
  for (const auto& c : contractions)
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j) max_alpha = std::max(max_alpha, c.alpha(i, j));

  LatticePath path = opts.path;
  if (path == LatticePath::Auto) path = p == 2 ? LatticePath::Toeplitz : LatticePath::Elimination;
  if (path == LatticePath::Toeplitz && p != 2)
    throw DomainError("the Toeplitz path needs exactly two blocks");

  double work = 0.0;
  std::vector<std::vector<detail::Edge>> edge_sets;
  for (const auto& c : contractions) edge_sets.push_back(detail::edges_of(c.alpha));
  if (path == LatticePath::Toeplitz) {
    work = static_cast<double>(dims[0] + dims[1]);
  } else if (path == LatticePath::Direct) {
    work = static_cast<double>(contractions.size());
    for (long long d : dims) work *= static_cast<double>(d);
  } else {
    std::vector<int> order;
    for (const auto& e : edge_sets) work += detail::elimination_plan(p, e, dims, order);
  }
  if (work > opts.budget)
    throw SizeError("lattice work " + detail::fmt(work) + " exceeds the budget " +
                    detail::fmt(opts.budget) + "; use a smaller n");

  const auto pw = detail::power_table(model, max_alpha, max_dim);
  CompensatedSum total;
  if (path == LatticePath::Toeplitz) {
    const int a = contractions.front().alpha(0, 1);
    for (long long d = -(dims[1] - 1); d <= dims[0] - 1; ++d)
      total.add(static_cast<double>(detail::lag_count(dims[0], dims[1], d)) * pw[a][std::llabs(d)]);
    out.meta["path"] = "toeplitz";
  } else if (path == LatticePath::Direct) {
    total.add(detail::direct_sum(dims, [&](const std::vector<long long>& k) {
      double s = 0.0;
      for (const auto& edges : edge_sets) {
        double prod = 1.0;
        for (const auto& e : edges) prod *= pw[e.alpha][std::llabs(k[e.i] - k[e.j])];
        s += prod;
      }
      return s;
    }));
    out.meta["path"] = "direct";
  } else {
    for (const auto& edges : edge_sets) total.add(detail::eliminate(p, edges, dims, pw));
    out.meta["path"] = "elimination";
  }
  out.value = total.value();
  out.meta["work"] = detail::fmt(work);
  return out;
}

/// Share of the lattice sum carried by points with some |k_i - k_j| <= band.
inline double diagonal_mass(int q, const std::vector<double>& t_list, long long n,
                            const CovarianceModel& model, int band = 2,
                            const ExactOptions& opts = {}) {
  const int p = static_cast<int>(t_list.size());
  const std::vector<int> q_list(p, q);
  const combinat::BlockProfile profile(q_list);
  if (n < 1) throw DomainError("n must be positive");
  std::vector<long long> dims(p);
  for (int i = 0; i < p; ++i) dims[i] = lattice_size(n, t_list[i]);
  const auto contractions = combinat::enumerate_contractions(profile, true);
  if (contractions.empty()) throw DomainError("the lattice sum is identically zero");
  int max_alpha = 0;
  for (const auto& c : contractions) max_alpha = std::max(max_alpha, c.alpha.total());
  const long long max_dim = *std::max_element(dims.begin(), dims.end());
  const auto pw = detail::power_table(model, max_alpha, max_dim);
  if (p == 2) {
    CompensatedSum near, all;
    for (long long d = -(dims[1] - 1); d <= dims[0] - 1; ++d) {
      const double v = static_cast<double>(detail::lag_count(dims[0], dims[1], d)) * pw[q][std::llabs(d)];
      all.add(v);
      if (std::llabs(d) <= band) near.add(v);
    }
    return near.value() / all.value();
  }
  double work = static_cast<double>(contractions.size());
  for (long long d : dims) work *= static_cast<double>(d);
  if (work > opts.budget)
    throw SizeError("lattice work " + detail::fmt(work) + " exceeds the budget " +
                    detail::fmt(opts.budget) + "; use a smaller n");
  std::vector<std::vector<detail::Edge>> edge_sets;
  for (const auto& c : contractions) edge_sets.push_back(detail::edges_of(c.alpha));
  auto value_at = [&](const std::vector<long long>& k) {
    double s = 0.0;
    for (const auto& edges : edge_sets) {
      double prod = 1.0;
      for (const auto& e : edges) prod *= pw[e.alpha][std::llabs(k[e.i] - k[e.j])];
      s += prod;
    }
    return s;
  };
  auto is_near = [&](const std::vector<long long>& k) {
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j)
        if (std::llabs(k[i] - k[j]) <= band) return true;
    return false;
  };
  const double all = detail::direct_sum(dims, value_at);
  const double near = detail::direct_sum(
      dims, [&](const std::vector<long long>& k) { return is_near(k) ? value_at(k) : 0.0; });
  return near / all;
}

// ---------------------------------------------------------------------------
// Limit moments

enum class Sampler { Mixture, Uniform };

struct LimitMethod {
  Method kind = Method::MC;
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 42;
  Sampler sampler = Sampler::Mixture;
  int level = 8;  // tanh-sinh refinements for Quadrature
  double tol = 1e-9;
};

namespace detail {

inline void check_hurst(int q, double H) {
  if (q < 1) throw DomainError("q must be positive");
  if (q >= 2 && !(H > 0.5 && H < 1.0)) throw DomainError("H must lie in (1/2,1)");
  if (q == 1 && !(H > 0.0 && H < 1.0)) throw DomainError("H must lie in (0,1)");
}

/// Pairwise singularity exponents beta_ij = alpha_ij (2 - 2H) / q.
inline std::vector<std::vector<double>> exponents(const combinat::AlphaMatrix& alpha, int q,
                                                  double H) {
  const int p = alpha.p();
  std::vector<std::vector<double>> b(p, std::vector<double>(p, 0.0));
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) b[i][j] = b[j][i] = alpha(i, j) * (2.0 - 2.0 * H) / q;
  return b;
}

/// Power counting: every subset S of size >= 2 needs sum_{pairs in S} beta < |S| - 1.
inline void check_integrable(const std::vector<std::vector<double>>& beta) {
  const int p = static_cast<int>(beta.size());
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j)
      if (beta[i][j] >= 1.0)
        throw DomainError("non-integrable singularity on pair (" + std::to_string(i + 1) + "," +
                          std::to_string(j + 1) + "): exponent " + fmt(beta[i][j]) + " >= 1");
  for (unsigned mask = 1; mask < (1u << p); ++mask) {
    const int size = std::popcount(mask);
    if (size < 3) continue;
    double s = 0.0;
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j)
        if ((mask >> i & 1u) && (mask >> j & 1u)) s += beta[i][j];
    if (s >= size - 1.0) {
      std::string names;
      for (int i = 0; i < p; ++i)
        if (mask >> i & 1u) names += (names.empty() ? "" : ",") + std::to_string(i + 1);
      throw DomainError("non-integrable singularity on the coincidence of {" + names + "}");
    }
  }
}

/// Child density proportional to |x - y|^(-b) on [0, T].
struct PowerConditional {
  static double side_mass(double d0, double d1, double b) {
    const double e = 1.0 - b;
    return (std::pow(d1, e) - std::pow(d0, e)) / e;
  }
  static double total_mass(double y, double T, double b) {
    double m = side_mass(std::max(0.0, y - T), y, b);
    if (y < T) m += side_mass(0.0, T - y, b);
    return m;
  }
  static double density(double x, double y, double T, double b) {
    return std::pow(std::abs(x - y), -b) / total_mass(y, T, b);
  }
  static double sample(double y, double T, double b, rng::Engine& eng) {
    const double e = 1.0 - b;
    const double dl0 = std::max(0.0, y - T), dl1 = y;
    const double ml = side_mass(dl0, dl1, b);
    const double mr = y < T ? side_mass(0.0, T - y, b) : 0.0;
    const double u = rng::uniform_open(eng) * (ml + mr);
    if (u < ml) {
      const double d = std::pow(std::pow(dl0, e) + u * e, 1.0 / e);
      return std::clamp(y - d, 0.0, T);
    }
    const double d = std::pow((u - ml) * e, 1.0 / e);
    return std::clamp(y + d, 0.0, T);
  }
};

/// One importance-sampling component: a maximum-weight spanning forest of the
/// singularity graph; roots uniform, children power-law around their parent.
struct ForestComponent {
  std::vector<int> parent;  // -1 for roots
  std::vector<double> beta_to_parent;
  std::vector<int> order;  // parents before children
};

inline ForestComponent build_forest(const std::vector<std::vector<double>>& beta) {
  const int p = static_cast<int>(beta.size());
  ForestComponent f;
  f.parent.assign(p, -1);
  f.beta_to_parent.assign(p, 0.0);
  std::vector<bool> in(p, false);
  // Prim on each component, heaviest edge first.
  for (int root = 0; root < p; ++root) {
    if (in[root]) continue;
    in[root] = true;
    f.order.push_back(root);
    for (;;) {
      int bu = -1, bv = -1;
      double bw = 0.0;
      for (int u : f.order)
        for (int v = 0; v < p; ++v)
          if (!in[v] && beta[u][v] > bw) {
            bw = beta[u][v];
            bu = u;
            bv = v;
          }
      if (bv < 0) break;
      in[bv] = true;
      f.parent[bv] = bu;
      f.beta_to_parent[bv] = bw;
      f.order.push_back(bv);
    }
  }
  return f;
}

}  // namespace detail

/// H^{p/2} (2H-1)^{p/2} sum_{r in B} int_{prod [0,t_i]} prod_{i<j} |s_i - s_j|^{-beta_ij} ds.
inline MomentResult limit_joint_moment(int q, double H, const std::vector<double>& t_list,
                                       const LimitMethod& method = {}) {
  detail::check_hurst(q, H);
  const int p = static_cast<int>(t_list.size());
  if (p < 2) throw DomainError("at least two times are required");
  for (double t : t_list)
    if (!(t > 0.0)) throw DomainError("times must be positive");
  const combinat::BlockProfile profile = combinat::BlockProfile::uniform(q, p);
  const auto contractions = combinat::enumerate_contractions(profile, true);
  MomentResult out;
  out.method = method.kind;
  out.meta["q"] = std::to_string(q);
  out.meta["H"] = detail::fmt(H);
  std::vector<std::vector<std::vector<double>>> betas;
  for (const auto& c : contractions) {
    betas.push_back(detail::exponents(c.alpha, q, H));
    detail::check_integrable(betas.back());
  }
  const double prefactor = std::pow(H * (2.0 * H - 1.0), 0.5 * p);
  if (contractions.empty()) {
    if (method.kind == Method::MC) {
      out.stderr_ = 0.0;
      out.n_samples = 0;
      out.seed = method.seed;
    }
    return out;
  }
  double volume = 1.0;
  for (double t : t_list) volume *= t;

  if (method.kind == Method::Quadrature) {
    if (p > 3) throw DomainError("quadrature is available for p <= 3 only");
    // Nested tanh-sinh with splits at every previously fixed variable.
    CompensatedSum total;
    for (const auto& beta : betas) {
      std::vector<double> s(p, 0.0);
      std::function<double(int)> level = [&](int j) -> double {
        std::vector<double> cuts{0.0, t_list[j]};
        for (int i = 0; i < j; ++i)
          if (s[i] > 0.0 && s[i] < t_list[j]) cuts.push_back(s[i]);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        double acc = 0.0;
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
          const double a = cuts[c], b = cuts[c + 1];
          acc += quad::tanh_sinh(
              [&](double x, double da, double db) {
                double w = 1.0;
                for (int i = 0; i < j; ++i) {
                  if (beta[i][j] == 0.0) continue;
                  const double dist = s[i] == a ? da : s[i] == b ? db : std::abs(x - s[i]);
                  w *= std::pow(dist, -beta[i][j]);
                }
                if (j + 1 == p) return w;
                s[j] = x;
                return w * level(j + 1);
              },
              a, b, method.level, method.tol);
        }
        return acc;
      };
      total.add(level(0));
    }
    out.value = prefactor * total.value();
    out.meta["level"] = std::to_string(method.level);
    return out;
  }

  // Monte Carlo: a defensive mixture of a uniform density and one forest
  // density per contraction, evaluated exactly at every sample.
  const std::size_t n_comp = betas.size();
  std::vector<detail::ForestComponent> forests;
  for (const auto& b : betas) forests.push_back(detail::build_forest(b));
  const bool uniform_only = method.sampler == Sampler::Uniform;
  const double w_uniform = uniform_only ? 1.0 : 0.1;
  const double w_forest = uniform_only ? 0.0 : (1.0 - w_uniform) / static_cast<double>(n_comp);

  constexpr std::uint64_t kBatches = 64;
  const std::uint64_t samples = method.samples;
  if (samples < 2) throw DomainError("Monte Carlo needs at least two samples");
  std::vector<double> batch_sum(kBatches, 0.0), batch_sq(kBatches, 0.0);
  parallel_for(kBatches, [&](std::size_t b) {
    const std::uint64_t begin = samples * b / kBatches, end = samples * (b + 1) / kBatches;
    auto eng = rng::stream(method.seed, 0x11a1, b);
    std::vector<double> s(p);
    CompensatedSum sum, sq;
    for (std::uint64_t k = begin; k < end; ++k) {
      double f = 0.0, g = 0.0;
      for (;;) {
        // draw
        const double u = rng::uniform_open(eng);
        if (uniform_only || u < w_uniform) {
          for (int i = 0; i < p; ++i) s[i] = t_list[i] * rng::uniform_open(eng);
        } else {
          std::size_t c = std::min(n_comp - 1, static_cast<std::size_t>((u - w_uniform) / w_forest));
          const auto& fr = forests[c];
          for (int v : fr.order) {
            if (fr.parent[v] < 0)
              s[v] = t_list[v] * rng::uniform_open(eng);
            else
              s[v] = detail::PowerConditional::sample(s[fr.parent[v]], t_list[v],
                                                      fr.beta_to_parent[v], eng);
          }
        }
        bool degenerate = false;
        for (int i = 0; i < p && !degenerate; ++i)
          for (int j = i + 1; j < p; ++j)
            if (s[i] == s[j]) degenerate = true;
        if (degenerate) continue;
        // integrand
        f = 0.0;
        for (const auto& beta : betas) {
          double logw = 0.0;
          for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j)
              if (beta[i][j] != 0.0) logw -= beta[i][j] * std::log(std::abs(s[i] - s[j]));
          f += std::exp(logw);
        }
        // mixture density
        g = w_uniform / volume;
        if (!uniform_only) {
          for (const auto& fr : forests) {
            double dens = w_forest;
            for (int v : fr.order) {
              if (fr.parent[v] < 0)
                dens /= t_list[v];
              else
                dens *= detail::PowerConditional::density(s[v], s[fr.parent[v]], t_list[v],
                                                          fr.beta_to_parent[v]);
            }
            g += dens;
          }
        }
        break;
      }
      const double w = f / g;
      sum.add(w);
      sq.add(w * w);
    }
    batch_sum[b] = sum.value();
    batch_sq[b] = sq.value();
  });
  CompensatedSum sum, sq;
  for (std::size_t b = 0; b < kBatches; ++b) {
    sum.add(batch_sum[b]);
    sq.add(batch_sq[b]);
  }
  const double nn = static_cast<double>(samples);
  const double mean = sum.value() / nn;
  const double var = std::max(0.0, (sq.value() / nn - mean * mean) * nn / (nn - 1.0));
  out.value = prefactor * mean;
  out.stderr_ = prefactor * std::sqrt(var / nn);
  out.n_samples = samples;
  out.seed = method.seed;
  out.meta["sampler"] = uniform_only ? "uniform" : "mixture";
  return out;
}

// ---------------------------------------------------------------------------
// Central limit variance

struct CltVariance {
  double free_value = 0.0;       // sum_s a_s^2 sigma_s^2
  double classical_value = 0.0;  // sum_s s! a_s^2 sigma_s^2
  double tail_bound = 0.0;       // estimate of the truncated tail, already added
  long long truncation = 0;
  std::vector<double> sigma2;  // sigma_s^2 by degree (0 below the rank)
};

inline constexpr long long kDefaultTruncation = 1000000;

/// sigma_s^2 = sum_{k in Z} rho(k)^s with truncation |k| <= T and a tail estimate.
inline double series_sigma2(const CovarianceModel& model, int s, long long truncation,
                            double* tail) {
  *tail = 0.0;
  return std::visit(
      [&](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, CovarianceModel::Delta>) {
          return 1.0;
        } else if constexpr (std::is_same_v<M, CovarianceModel::Geometric>) {
          const double as = std::pow(m.a, s);
          return 1.0 + 2.0 * as / (1.0 - as);
        } else if constexpr (std::is_same_v<M, CovarianceModel::Table>) {
          CompensatedSum sum;
          sum.add(1.0);
          for (std::size_t k = 1; k < m.values.size(); ++k) sum.add(2.0 * std::pow(m.values[k], s));
          return sum.value();
        } else {
          if (!(s * m.D > 1.0))
            throw DomainError("sum of rho(k)^" + std::to_string(s) +
                              " diverges (s*D <= 1): long-range regime, use the non-central normalisation");
          CompensatedSum sum;
          sum.add(1.0);
          for (long long k = truncation; k >= 1; --k) sum.add(2.0 * std::pow(model(k), s));
          // integral comparison for sum_{k > T} k^{-sD} L(k)^s
          const double T = static_cast<double>(truncation) + 0.5;
          *tail = 2.0 * std::pow(T, 1.0 - s * m.D) * std::pow(m.L(T), s) / (s * m.D - 1.0);
          return sum.value() + *tail;
        }
      },
      model.variant());
}

inline CltVariance clt_variance(const poly::TchebExpansion& expansion, const CovarianceModel& model,
                                long long truncation = kDefaultTruncation) {
  if (!expansion.rank) throw DomainError("expansion has no term of degree >= 1");
  if (truncation < 1) throw DomainError("truncation must be positive");
  CltVariance out;
  out.truncation = truncation;
  out.sigma2.assign(expansion.coeffs.size(), 0.0);
  CompensatedSum fr, cl;
  double factorial = 1.0;
  for (std::size_t s = 1; s < expansion.coeffs.size(); ++s) {
    factorial *= static_cast<double>(s);
    const double a = expansion.coeffs[s];
    if (a == 0.0) continue;
    double tail = 0.0;
    const double sig = series_sigma2(model, static_cast<int>(s), truncation, &tail);
    out.sigma2[s] = sig;
    out.tail_bound += a * a * tail;
    fr.add(a * a * sig);
    cl.add(factorial * a * a * sig);
  }
  out.free_value = fr.value();
  out.classical_value = cl.value();
  return out;
}

// ---------------------------------------------------------------------------
// Non-central normalisation

struct NcltConstants {
  double normalization;  // n^{1 - qD/2} L(n)^{q/2}
  double limit_coeff;    // a_q / sqrt((1 - qD/2)(1 - qD))
  double H;              // 1 - qD/2
};

inline void check_long_range(int q, double D) {
  if (q < 1) throw DomainError("q must be positive");
  if (!(D > 0.0 && D * q < 1.0))
    throw DomainError("D must lie in (0, 1/q) for the non-central regime");
}

inline NcltConstants nclt_constants(int q, double D, const SlowlyVarying& L, long long n,
                                    double a_q = 1.0) {
  check_long_range(q, D);
  if (n < 1) throw DomainError("n must be positive");
  const double x = static_cast<double>(n);
  NcltConstants c;
  c.normalization = std::pow(x, 1.0 - q * D / 2.0) * std::pow(L(x), q / 2.0);
  c.limit_coeff = a_q / std::sqrt((1.0 - q * D / 2.0) * (1.0 - q * D));
  c.H = 1.0 - q * D / 2.0;
  return c;
}

/// (sum_{j=1}^{[nt]} j^{-qD} L(j)^q) / ([nt]^{1-qD} L([nt])^q / (1 - qD)).
inline double karamata_ratio(int q, double D, const SlowlyVarying& L, long long n, double t = 1.0) {
  if (q < 1) throw DomainError("q must be positive");
  if (!(q * D < 1.0)) throw DomainError("karamata ratio needs qD < 1");
  if (n < 1) throw DomainError("n must be positive");
  const long long N = lattice_size(n, t);
  if (N < 1) throw DomainError("[nt] must be at least 1");
  CompensatedSum s;
  for (long long j = N; j >= 1; --j) {
    const double x = static_cast<double>(j);
    s.add(std::pow(x, -q * D) * std::pow(L(x), q));
  }
  const double x = static_cast<double>(N);
  const double denom = std::pow(x, 1.0 - q * D) * std::pow(L(x), q) / (1.0 - q * D);
  return s.value() / denom;
}

// ---------------------------------------------------------------------------
// Convergence driver

struct ConvergeRow {
  long long n;
  double scaled_moment;
  double limit;
  double abs_err;
};

struct ConvergeResult {
  std::vector<ConvergeRow> rows;
  double limit = 0.0;
  std::optional<double> limit_stderr;
  std::optional<double> fitted_K;  // extrapolated scaled/limit ratio
};

/// phi(V_n(1)^p) / normalization^p for V_n = sum_{k <= n} a_q U_q(X_k) against its limit.
inline ConvergeResult converge(int q, double D, const SlowlyVarying& L, int p,
                               const std::vector<long long>& n_grid,
                               const CovarianceModel& model, double a_q = 1.0,
                               const LimitMethod& limit_method = {},
                               const ExactOptions& opts = {}) {
  check_long_range(q, D);
  if (p < 2) throw DomainError("p must be at least 2");
  if (n_grid.empty()) throw DomainError("empty n grid");
  const double H = 1.0 - q * D / 2.0;
  const auto c1 = nclt_constants(q, D, L, 1, a_q);
  ConvergeResult out;
  const std::vector<double> ones(p, 1.0);
  double base;
  if (p == 2) {
    base = 1.0;  // second moment of the limit at t = 1
  } else {
    LimitMethod m = limit_method;
    if (p <= 3 && m.kind != Method::MC) m.kind = Method::Quadrature;
    const auto lim = limit_joint_moment(q, H, ones, m);
    base = lim.value;
    if (lim.stderr_) out.limit_stderr = std::pow(c1.limit_coeff, p) * *lim.stderr_;
  }
  out.limit = std::pow(c1.limit_coeff, p) * base;
  for (long long n : n_grid) {
    const auto c = nclt_constants(q, D, L, n, a_q);
    const auto ex = exact_joint_moment(std::vector<int>(p, q), ones, n, model, opts);
    const double scaled = std::pow(a_q, p) * ex.value / std::pow(c.normalization, p);
    out.rows.push_back({n, scaled, out.limit, std::abs(scaled - out.limit)});
  }
  if (out.rows.size() >= 2 && out.limit != 0.0) {
    // Leading finite-n correction of the lattice sums decays like n^{-(1 - qD)}.
    const auto& r1 = out.rows[out.rows.size() - 2];
    const auto& r2 = out.rows.back();
    const double f = std::pow(static_cast<double>(r1.n) / static_cast<double>(r2.n), 1.0 - q * D);
    const double k1 = r1.scaled_moment / out.limit, k2 = r2.scaled_moment / out.limit;
    out.fitted_K = (k2 - f * k1) / (1.0 - f);
  }
  return out;
}

}  // namespace wignerlab::moments
