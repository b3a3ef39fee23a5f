#pragma once

// Command-line front end. run() parses argv, dispatches to the library and
// renders the result as plain text, CSV or JSON.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <wignerlab.hpp>

namespace wignerlab::cli {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Results and rendering

using Cell = std::variant<std::monostate, double, long long, std::string>;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

struct Result {
  std::optional<double> scalar;
  std::optional<Table> table;
  std::optional<double> stderr_;
  std::string method = "exact";
  std::optional<std::uint64_t> seed;
  json meta = json::object();
  std::vector<std::string> trailer;  // extra CSV/plain lines after the table
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string cell_text(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, std::monostate>)
          return "";
        else if constexpr (std::is_same_v<V, double>)
          return format_double(v);
        else if constexpr (std::is_same_v<V, long long>)
          return std::to_string(v);
        else
          return v;
      },
      c);
}

inline json cell_json(const Cell& c) {
  return std::visit(
      [](const auto& v) -> json {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, std::monostate>)
          return nullptr;
        else if constexpr (std::is_same_v<V, double>)
          return std::isfinite(v) ? json(v) : json(format_double(v));
        else
          return json(v);
      },
      c);
}

enum class Format { Default, Csv, Json };

inline void render(const Result& r, Format fmt, std::ostream& out) {
  if (fmt == Format::Json) {
    json j;
    if (r.table) {
      json rows = json::array();
      for (const auto& row : r.table->rows) {
        json o = json::object();
        for (std::size_t c = 0; c < row.size(); ++c) o[r.table->header[c]] = cell_json(row[c]);
        rows.push_back(o);
      }
      j["value"] = rows;
    } else {
      j["value"] = cell_json(*r.scalar);
    }
    if (r.stderr_) j["stderr"] = *r.stderr_;
    j["method"] = r.method;
    if (r.seed) j["seed"] = *r.seed;
    j["meta"] = r.meta;
    out << j.dump(2) << "\n";
    return;
  }
  if (r.table) {
    for (std::size_t c = 0; c < r.table->header.size(); ++c)
      out << (c ? "," : "") << r.table->header[c];
    out << "\n";
    for (const auto& row : r.table->rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << cell_text(row[c]);
      out << "\n";
    }
  } else if (fmt == Format::Csv) {
    out << "value" << (r.stderr_ ? ",stderr" : "") << "\n";
    out << format_double(*r.scalar);
    if (r.stderr_) out << "," << format_double(*r.stderr_);
    out << "\n";
  } else {
    out << format_double(*r.scalar);
    if (r.stderr_) out << " +- " << format_double(*r.stderr_);
    out << "\n";
  }
  for (const auto& line : r.trailer) out << line << "\n";
}

// ---------------------------------------------------------------------------
// Argument helpers

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : cur.substr(b, e - b + 1));
  }
  return out;
}

inline double parse_real(const std::string& s, const std::string& what) {
  return wignerlab::detail::parse_double(s, what);
}

inline std::vector<double> parse_reals(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) out.push_back(parse_real(tok, what));
  if (out.empty()) throw UsageError(what + " list is empty");
  return out;
}

/// Integer that may be written in floating notation (1e5).
inline long long parse_count(const std::string& s, const std::string& what) {
  const double v = parse_real(s, what);
  if (!(std::abs(v) < 9.0e18) || v != std::floor(v))
    throw UsageError(what + " must be an integer, got '" + s + "'");
  return static_cast<long long>(v);
}

inline std::vector<long long> parse_counts(const std::string& s, const std::string& what) {
  std::vector<long long> out;
  for (const auto& tok : split_list(s)) out.push_back(parse_count(tok, what));
  if (out.empty()) throw UsageError(what + " list is empty");
  return out;
}

inline std::vector<int> parse_ints(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (long long v : parse_counts(s, what)) {
    if (v < INT32_MIN || v > INT32_MAX) throw UsageError(what + " entry out of range");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline poly::Basis parse_basis(const std::string& s) {
  if (s == "tcheb") return poly::Basis::Tchebycheff;
  if (s == "hermite") return poly::Basis::Hermite;
  throw UsageError("basis must be tcheb or hermite");
}

inline SlowlyVarying parse_slowly_varying(const std::string& s) {
  if (s == "const") return SlowlyVarying::constant();
  if (s.rfind("const:", 0) == 0) return SlowlyVarying::constant(parse_real(s.substr(6), "constant"));
  if (s == "log") return SlowlyVarying::log();
  if (s == "loglog") return SlowlyVarying::loglog();
  throw UsageError("L must be const, const:<c>, log or loglog");
}

/// Replaces `--args-file PATH` (or `--args-file=PATH`) by the flags in PATH, one per line.
inline std::vector<std::string> expand_args_files(const std::vector<std::string>& args, int depth = 0) {
  if (depth > 8) throw UsageError("--args-file nesting too deep");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--args-file") {
      if (i + 1 >= args.size()) throw UsageError("--args-file needs a path");
      path = args[++i];
    } else if (args[i].rfind("--args-file=", 0) == 0) {
      path = args[i].substr(12);
    } else {
      out.push_back(args[i]);
      continue;
    }
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open args file '" + path + "'");
    std::vector<std::string> inner;
    std::string line;
    while (std::getline(in, line)) {
      const auto b = line.find_first_not_of(" \t\r");
      if (b == std::string::npos || line[b] == '#') continue;
      const auto e = line.find_last_not_of(" \t\r");
      line = line.substr(b, e - b + 1);
      const auto sp = line.find_first_of(" \t");
      if (sp == std::string::npos) {
        inner.push_back(line);
      } else {
        inner.push_back(line.substr(0, sp));
        const auto v = line.find_first_not_of(" \t", sp);
        inner.push_back(line.substr(v));
      }
    }
    for (auto& a : expand_args_files(inner, depth + 1)) out.push_back(std::move(a));
  }
  return out;
}

inline linalg::Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open matrix file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    bool ok = true;
    for (const auto& tok : split_list(line)) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (tok.empty() || end != tok.c_str() + tok.size()) {
        ok = false;
        break;
      }
      row.push_back(v);
    }
    if (!ok) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw UsageError("non-numeric entry in matrix file: '" + line + "'");
    }
    first = false;
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw UsageError("matrix file '" + path + "' is empty");
  linalg::Matrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw UsageError("matrix rows have different lengths");
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

inline json meta_json(const std::map<std::string, std::string>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

inline Result from_moment(const moments::MomentResult& m) {
  Result r;
  r.scalar = m.value;
  r.stderr_ = m.stderr_;
  r.method = moments::to_string(m.method);
  r.seed = m.seed;
  r.meta = meta_json(m.meta);
  if (m.n_samples) r.meta["samples"] = *m.n_samples;
  return r;
}

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Domain: return 3;
    case ErrorKind::Size: return 4;
    case ErrorKind::Accuracy: return 5;
    case ErrorKind::Numeric: return 5;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  try {
    args = expand_args_files(raw_args);
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  }

  CLI::App app{"Exact and asymptotic joint moments of functionals of stationary semicircular sequences"};
  app.name("wignerlab");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  std::string format;
  unsigned threads = 0;
  std::string output_path;
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--threads", threads, "Cap on worker threads (default: WIGNERLAB_THREADS or all cores)");
  app.add_option("--output", output_path, "Write the result to this file instead of stdout");
  app.add_option("--args-file", "File with one flag per line (expanded before parsing)");

  std::function<Result()> action;
  auto sub = [&](CLI::App* parent, const std::string& name, const std::string& desc) {
    CLI::App* s = parent->add_subcommand(name, desc);
    s->fallthrough();
    return s;
  };
  auto set_action = [&](CLI::App* s, std::function<Result()> f) {
    s->callback([&action, f = std::move(f)] { action = f; });
  };

  // ---- poly
  CLI::App* poly_cmd = sub(&app, "poly", "Tchebycheff and Hermite polynomials");
  poly_cmd->require_subcommand(1);
  std::string basis_s = "tcheb";
  unsigned k_deg = 0;
  double x_val = 0.0;
  std::string coeffs_s;
  {
    CLI::App* s = sub(poly_cmd, "eval", "Evaluate U_k(x) or H_k(x)");
    s->add_option("--basis", basis_s)->check(CLI::IsMember({"tcheb", "hermite"}));
    s->add_option("--k", k_deg)->required();
    s->add_option("--x", x_val)->required();
    set_action(s, [&] {
      Result r;
      r.scalar = poly::basis_eval(parse_basis(basis_s), k_deg, x_val);
      r.meta["basis"] = basis_s;
      r.meta["k"] = k_deg;
      return r;
    });
  }
  {
    CLI::App* s = sub(poly_cmd, "decompose", "Expand a polynomial given by monomial coefficients");
    s->add_option("--basis", basis_s)->check(CLI::IsMember({"tcheb", "hermite"}));
    s->add_option("--coeffs", coeffs_s, "c0,c1,... (coefficient of x^d at position d)")->required();
    set_action(s, [&] {
      const auto basis = parse_basis(basis_s);
      const auto toks = split_list(coeffs_s);
      bool integral = !toks.empty();
      std::vector<long long> ints;
      std::vector<double> reals;
      for (const auto& t : toks) {
        const double v = parse_real(t, "coefficient");
        reals.push_back(v);
        if (v == std::floor(v) && std::abs(v) < 1e15)
          ints.push_back(static_cast<long long>(v));
        else
          integral = false;
      }
      if (reals.empty()) throw UsageError("coefficient list is empty");
      Result r;
      r.table = Table{{"degree", "coefficient"}, {}};
      std::optional<unsigned> rank;
      if (integral) {
        const auto e = poly::to_exact(ints, basis);
        for (std::size_t d = 0; d < e.coeffs.size(); ++d)
          r.table->rows.push_back({static_cast<long long>(d), e.coeffs[d].convert_to<double>()});
        rank = e.rank;
        r.meta["arithmetic"] = "rational";
      } else {
        const auto e = poly::decompose(reals, basis);
        for (std::size_t d = 0; d < e.coeffs.size(); ++d)
          r.table->rows.push_back({static_cast<long long>(d), e.coeffs[d]});
        rank = e.rank;
        r.meta["arithmetic"] = "double";
      }
      r.meta["basis"] = basis_s;
      r.meta["rank"] = rank ? json(*rank) : json(nullptr);
      r.trailer.push_back("rank=" + (rank ? std::to_string(*rank) : std::string("none")));
      return r;
    });
  }

  // ---- combinatorics
  std::string q_s, t_s;
  bool scalar_only = false;
  int bound = combinat::kDefaultContractionBound;
  {
    CLI::App* s = sub(&app, "contractions", "Contraction vectors r and association matrices alpha");
    s->add_option("--q", q_s, "Block sizes q_1,...,q_p")->required();
    s->add_flag("--scalar-only", scalar_only, "Only fully contracted vectors (the set B)");
    s->add_option("--bound", bound, "Refuse sum(q) above this bound");
    set_action(s, [&] {
      const combinat::BlockProfile profile(parse_ints(q_s, "q"));
      const auto vecs = combinat::enumerate_contractions(profile, scalar_only, bound);
      const int p = profile.p();
      Result r;
      Table t;
      for (int i = 1; i < p; ++i) t.header.push_back("r" + std::to_string(i));
      t.header.push_back("scalar");
      for (int i = 1; i <= p; ++i)
        for (int j = i + 1; j <= p; ++j) t.header.push_back("alpha_" + std::to_string(i) + "_" + std::to_string(j));
      for (const auto& v : vecs) {
        std::vector<Cell> row;
        for (int x : v.r) row.push_back(static_cast<long long>(x));
        row.push_back(static_cast<long long>(v.scalar ? 1 : 0));
        if (v.scalar) {
          for (int a : v.alpha.flattened()) row.push_back(static_cast<long long>(a));
        } else {
          for (int c = 0; c < p * (p - 1) / 2; ++c) row.push_back(std::monostate{});
        }
        t.rows.push_back(std::move(row));
      }
      r.table = std::move(t);
      r.meta["count"] = vecs.size();
      return r;
    });
  }
  std::string nc_kind = "pairing";
  int nc_n = 0;
  bool count_only = false;
  {
    CLI::App* s = sub(&app, "nc", "Non-crossing pairings and partitions");
    s->add_option("--kind", nc_kind)->check(CLI::IsMember({"pairing", "partition"}));
    s->add_option("--n", nc_n)->required();
    s->add_flag("--count-only", count_only);
    set_action(s, [&] {
      const auto kind = nc_kind == "pairing" ? combinat::NCKind::Pairing : combinat::NCKind::Partition;
      const auto all = combinat::enumerate_nc(kind, nc_n);
      Result r;
      r.meta["kind"] = nc_kind;
      r.meta["n"] = nc_n;
      if (count_only) {
        r.scalar = static_cast<double>(all.size());
        return r;
      }
      Table t{{"index", "blocks"}, {}};
      for (std::size_t i = 0; i < all.size(); ++i) {
        std::string b;
        for (const auto& block : all[i].blocks) {
          b += "(";
          for (std::size_t j = 0; j < block.size(); ++j) b += (j ? " " : "") + std::to_string(block[j] + 1);
          b += ")";
        }
        t.rows.push_back({static_cast<long long>(i + 1), b});
      }
      r.table = std::move(t);
      r.meta["count"] = all.size();
      return r;
    });
  }

  // ---- free calculus
  CLI::App* free_cmd = sub(&app, "free", "Semicircular Wick rule and free cumulants");
  free_cmd->require_subcommand(1);
  std::string gamma_path, word_s, cumulants_s;
  int moment_n = 0;
  {
    CLI::App* s = sub(free_cmd, "wick", "Joint moment of a semicircular family");
    s->add_option("--gamma", gamma_path, "CSV covariance matrix")->required();
    s->add_option("--word", word_s, "1-based indices, e.g. 1,2,1,2")->required();
    set_action(s, [&] {
      const freecalc::CovMatrix gamma(load_matrix_csv(gamma_path));
      std::vector<int> word;
      for (int w : parse_ints(word_s, "word")) word.push_back(w - 1);
      Result r;
      r.scalar = freecalc::wick_joint_moment(gamma, word);
      r.meta["pairings"] = word.size() % 2 ? 0.0 : freecalc::catalan(static_cast<int>(word.size() / 2));
      return r;
    });
  }
  {
    CLI::App* s = sub(free_cmd, "moments", "Moments from free cumulants");
    s->add_option("--cumulants", cumulants_s, "kappa_1,kappa_2,...")->required();
    s->add_option("--n", moment_n)->required();
    set_action(s, [&] {
      const auto m = freecalc::free_moments_from_cumulants(parse_reals(cumulants_s, "cumulant"), moment_n);
      Result r;
      r.table = Table{{"n", "moment"}, {}};
      for (std::size_t k = 0; k < m.size(); ++k) r.table->rows.push_back({static_cast<long long>(k + 1), m[k]});
      return r;
    });
  }

  // ---- moments
  CLI::App* moment_cmd = sub(&app, "moment", "Exact lattice and limit joint moments");
  moment_cmd->require_subcommand(1);
  std::string n_s, rho_s, path_s = "auto", method_s = "mc", samples_s = "1e6", sampler_s = "mixture";
  double budget = 1e9, H = 0.7;
  std::uint64_t seed = 42;
  int q_int = 2;
  {
    CLI::App* s = sub(moment_cmd, "exact", "phi(prod_i V_n(U_{q_i}, t_i)) on the lattice");
    s->add_option("--q", q_s)->required();
    s->add_option("--t", t_s, "t_1,...,t_p (default all 1)");
    s->add_option("--n", n_s)->required();
    s->add_option("--rho", rho_s, "delta | geometric:a=A | powerlaw:D=D[,L=...] | table:PATH")->required();
    s->add_option("--budget", budget, "Maximum work of the chosen summation path");
    s->add_option("--path", path_s)->check(CLI::IsMember({"auto", "toeplitz", "direct", "elimination"}));
    set_action(s, [&] {
      const auto q = parse_ints(q_s, "q");
      const auto t = t_s.empty() ? std::vector<double>(q.size(), 1.0) : parse_reals(t_s, "t");
      moments::ExactOptions opts;
      opts.budget = budget;
      opts.path = path_s == "toeplitz"  ? moments::LatticePath::Toeplitz
                  : path_s == "direct"  ? moments::LatticePath::Direct
                  : path_s == "elimination" ? moments::LatticePath::Elimination
                                        : moments::LatticePath::Auto;
      const auto model = parse_covariance_model(rho_s);
      Result r = from_moment(moments::exact_joint_moment(q, t, parse_count(n_s, "n"), model, opts));
      r.meta["model"] = model.describe();
      return r;
    });
  }
  {
    CLI::App* s = sub(moment_cmd, "limit", "Joint moment of the Tchebycheff process");
    s->add_option("--q", q_int)->required();
    s->add_option("--H", H)->required();
    s->add_option("--t", t_s)->required();
    s->add_option("--method", method_s)->check(CLI::IsMember({"mc", "quadrature"}));
    s->add_option("--samples", samples_s);
    s->add_option("--seed", seed);
    s->add_option("--sampler", sampler_s)->check(CLI::IsMember({"mixture", "uniform"}));
    set_action(s, [&] {
      moments::LimitMethod m;
      m.kind = method_s == "mc" ? moments::Method::MC : moments::Method::Quadrature;
      const long long samples = parse_count(samples_s, "samples");
      if (samples < 2) throw UsageError("samples must be at least 2");
      m.samples = static_cast<std::uint64_t>(samples);
      m.seed = seed;
      m.sampler = sampler_s == "uniform" ? moments::Sampler::Uniform : moments::Sampler::Mixture;
      return from_moment(moments::limit_joint_moment(q_int, H, parse_reals(t_s, "t"), m));
    });
  }
  std::string truncation_s = "1e6";
  {
    CLI::App* clt_cmd = sub(&app, "clt", "Central limit theorem constants");
    clt_cmd->require_subcommand(1);
    CLI::App* s = sub(clt_cmd, "variance", "sum_s a_s^2 sigma_s^2 (free) and sum_s s! a_s^2 sigma_s^2 (classical)");
    s->add_option("--coeffs", coeffs_s, "a_0,a_1,... in the Tchebycheff (free) / Hermite (classical) basis")->required();
    s->add_option("--rho", rho_s)->required();
    s->add_option("--truncation", truncation_s);
    set_action(s, [&] {
      const auto e = poly::from_basis_coeffs(poly::Basis::Tchebycheff, parse_reals(coeffs_s, "coefficient"));
      const auto model = parse_covariance_model(rho_s);
      const auto v = moments::clt_variance(e, model, parse_count(truncation_s, "truncation"));
      Result r;
      r.table = Table{{"free_variance", "classical_variance", "tail_estimate", "truncation"},
                      {{v.free_value, v.classical_value, v.tail_bound, static_cast<long long>(v.truncation)}}};
      r.meta["model"] = model.describe();
      return r;
    });
  }
  double D = 0.3, t_one = 1.0, a_q = 1.0;
  std::string L_s = "const";
  int p_int = 2;
  {
    CLI::App* s = sub(&app, "karamata", "Ratio of sum_{j<=[nt]} j^{-qD} L(j)^q to its Karamata equivalent");
    s->add_option("--q", q_int)->required();
    s->add_option("--D", D)->required();
    s->add_option("--n", n_s)->required();
    s->add_option("--L", L_s, "const | const:<c> | log | loglog");
    s->add_option("--t", t_one);
    set_action(s, [&] {
      const auto L = parse_slowly_varying(L_s);
      Result r;
      r.scalar = moments::karamata_ratio(q_int, D, L, parse_count(n_s, "n"), t_one);
      r.meta["L"] = L.describe();
      return r;
    });
  }
  std::string grid_s;
  {
    CLI::App* s = sub(&app, "converge", "Scaled lattice moments against the non-central limit");
    s->add_option("--q", q_int)->required();
    s->add_option("--D", D)->required();
    s->add_option("--p", p_int)->required();
    s->add_option("--n-grid", grid_s)->required();
    s->add_option("--L", L_s, "const | const:<c> | log | loglog");
    s->add_option("--a-q", a_q);
    s->add_option("--samples", samples_s, "MC samples for the limit when p >= 4");
    s->add_option("--seed", seed);
    s->add_option("--budget", budget);
    set_action(s, [&] {
      const auto L = parse_slowly_varying(L_s);
      const auto model = CovarianceModel::power_law(D, L);
      moments::LimitMethod lm;
      lm.samples = static_cast<std::uint64_t>(parse_count(samples_s, "samples"));
      lm.seed = seed;
      moments::ExactOptions opts;
      opts.budget = budget;
      const auto c = moments::converge(q_int, D, L, p_int, parse_counts(grid_s, "n-grid"), model, a_q, lm, opts);
      Result r;
      r.table = Table{{"n", "scaled_moment", "limit", "abs_err"}, {}};
      for (const auto& row : c.rows)
        r.table->rows.push_back({static_cast<long long>(row.n), row.scaled_moment, row.limit, row.abs_err});
      r.meta["model"] = model.describe();
      if (c.limit_stderr) {
        r.meta["limit_stderr"] = *c.limit_stderr;
        r.meta["samples"] = lm.samples;
        r.seed = seed;
        r.method = "exact+mc";
      }
      if (c.fitted_K) r.meta["fitted_ratio"] = *c.fitted_K;
      return r;
    });
  }

  // ---- kernels
  CLI::App* kernel_cmd = sub(&app, "kernel", "Kernels and operators of the Tchebycheff processes");
  kernel_cmd->require_subcommand(1);
  std::string x_s, domain_s = "time", layout_s = "uniform";
  std::size_t grid = 2048;
  int pmax = 6;
  double x_min = -8.0;
  {
    CLI::App* s = sub(kernel_cmd, "eval", "f_{H,q}(t, x_1..x_q)");
    s->add_option("--q", q_int)->required();
    s->add_option("--H", H)->required();
    s->add_option("--t", t_one)->required();
    s->add_option("--x", x_s)->required();
    set_action(s, [&] {
      Result r;
      r.scalar = kernels::kernel_eval({q_int, H, t_one}, parse_reals(x_s, "x"));
      r.method = "quadrature";
      return r;
    });
  }
  {
    CLI::App* s = sub(kernel_cmd, "norm", "Squared L2 norm of the kernel");
    s->add_option("--q", q_int)->required();
    s->add_option("--H", H)->required();
    s->add_option("--t", t_one)->required();
    s->add_option("--grid", grid);
    set_action(s, [&] {
      const auto k = kernels::kernel_l2_norm_sq({q_int, H, t_one}, grid);
      Result r;
      r.table = Table{{"grid", "grid_value", "refined_value", "analytic"},
                      {{static_cast<long long>(k.m), k.grid, k.refined, k.analytic}}};
      r.meta["coarse"] = k.coarse;
      r.method = "quadrature";
      return r;
    });
  }
  {
    CLI::App* s = sub(kernel_cmd, "cumulants", "Free cumulants of the Rosenblatt variable by the trace formula");
    s->add_option("--H", H)->required();
    s->add_option("--t", t_one)->required();
    s->add_option("--pmax", pmax);
    s->add_option("--grid", grid);
    s->add_option("--domain", domain_s, "time (reduced operator) or space (x-grid)")
        ->check(CLI::IsMember({"time", "space"}));
    s->add_option("--layout", layout_s, "space grid layout")->check(CLI::IsMember({"uniform", "graded"}));
    s->add_option("--x-min", x_min, "left end of the space grid, in units of t");
    set_action(s, [&] {
      kernels::DiscretizedOperator op;
      if (domain_s == "time") {
        op = kernels::reduced_operator(H, t_one, grid);
      } else {
        kernels::SpaceGrid g;
        g.m = grid;
        g.graded = layout_s == "graded";
        g.x_min = x_min * t_one;
        g.x_max = t_one;
        if (g.graded && x_min == -8.0) g.x_min = -1e12 * t_one;
        op = kernels::discretize_operator(H, t_one, g);
      }
      const auto rows = kernels::free_cumulants_trace(op, pmax);
      Result r;
      r.table = Table{{"p", "kappa_trace", "kappa_eigen"}, {}};
      for (const auto& row : rows)
        r.table->rows.push_back({static_cast<long long>(row.p), row.via_trace, row.via_eigen});
      r.meta["domain"] = domain_s;
      r.meta["layout"] = op.layout;
      r.meta["grid"] = op.m;
      r.meta["truncated_mass_estimate"] = op.truncated_mass;
      return r;
    });
  }

  // ---- simulation
  CLI::App* sim_cmd = sub(&app, "simulate", "Random-matrix and classical Monte Carlo simulators");
  sim_cmd->require_subcommand(1);
  std::size_t mat_n = 300, reps = 100, matrix_n = 200;
  std::string poly_s = "0,0,1", times_s = "1,2", kind_s = "free", norm_s = "auto", ntime_s = "1000",
              limit_samples_s = "2e5";
  std::uint64_t sim_seed = 7;
  {
    CLI::App* s = sub(sim_cmd, "wigner", "tau_n(Q(M_n(t))) for the matrix Brownian motion");
    s->add_option("--n", mat_n);
    s->add_option("--reps", reps);
    s->add_option("--t", t_one);
    s->add_option("--poly", poly_s, "monomial coefficients c0,c1,...");
    s->add_option("--seed", sim_seed);
    set_action(s, [&] {
      sim::MatrixEnsembleConfig c;
      c.n = mat_n;
      c.reps = reps;
      c.times = {t_one};
      c.seed = sim_seed;
      Result r = from_moment(sim::estimate_poly_moment(c, parse_reals(poly_s, "poly"), t_one));
      r.meta["n"] = mat_n;
      r.meta["reps"] = reps;
      return r;
    });
  }
  {
    CLI::App* s = sub(sim_cmd, "freeness", "Alternating centred products over distinct increments");
    s->add_option("--n", mat_n);
    s->add_option("--times", times_s);
    s->add_option("--reps", reps);
    s->add_option("--poly", poly_s, "monomial coefficients of every factor");
    s->add_option("--word", word_s, "1-based increment index per factor (default alternating 1,2,1,2)");
    s->add_option("--seed", sim_seed);
    set_action(s, [&] {
      sim::MatrixEnsembleConfig c;
      c.n = mat_n;
      c.reps = reps;
      c.times = parse_reals(times_s, "times");
      c.seed = sim_seed;
      std::vector<std::size_t> word;
      if (word_s.empty()) {
        word = {0, 1, 0, 1};
      } else {
        for (int w : parse_ints(word_s, "word")) {
          if (w < 1) throw DomainError("increment indices are 1-based");
          word.push_back(static_cast<std::size_t>(w - 1));
        }
      }
      const auto polyc = parse_reals(poly_s, "poly");
      const auto f = sim::asymptotic_freeness_check(c, std::vector<std::vector<double>>(word.size(), polyc), word);
      Result r;
      r.scalar = f.value;
      r.stderr_ = f.stderr_;
      r.method = "mc";
      r.seed = sim_seed;
      r.meta["rms"] = f.rms;
      r.meta["centers"] = f.centers;
      r.meta["n"] = mat_n;
      r.meta["reps"] = reps;
      return r;
    });
  }
  {
    CLI::App* s = sub(sim_cmd, "limits", "Empirical normalised moments of V_n(Q, t)");
    s->add_option("--kind", kind_s)->check(CLI::IsMember({"free", "classical"}));
    s->add_option("--q", q_int, "single basis term of degree q (ignored with --coeffs)");
    s->add_option("--coeffs", coeffs_s, "basis coefficients a_0,a_1,...");
    s->add_option("--rho", rho_s)->required();
    s->add_option("--ntime", ntime_s);
    s->add_option("--matrix-n", matrix_n);
    s->add_option("--reps", reps);
    s->add_option("--t", t_s, "t_1,... (default 1)");
    s->add_option("--seed", sim_seed);
    s->add_option("--normalization", norm_s)->check(CLI::IsMember({"auto", "clt", "nclt"}));
    s->add_option("--limit-samples", limit_samples_s);
    set_action(s, [&] {
      sim::LimitsConfig c;
      c.kind = kind_s == "free" ? sim::LimitKind::Free : sim::LimitKind::Classical;
      const auto basis = c.kind == sim::LimitKind::Free ? poly::Basis::Tchebycheff : poly::Basis::Hermite;
      if (!coeffs_s.empty()) {
        c.expansion = poly::from_basis_coeffs(basis, parse_reals(coeffs_s, "coefficient"));
      } else {
        if (q_int < 1) throw DomainError("q must be positive");
        c.expansion = poly::single_term(basis, static_cast<unsigned>(q_int));
      }
      c.model = parse_covariance_model(rho_s);
      const long long nt = parse_count(ntime_s, "ntime");
      if (nt < 1) throw DomainError("ntime must be positive");
      c.n_time = static_cast<std::size_t>(nt);
      c.matrix_n = matrix_n;
      c.reps = reps;
      if (!t_s.empty()) c.t_list = parse_reals(t_s, "t");
      c.seed = sim_seed;
      c.normalization = norm_s == "clt" ? sim::Normalization::Clt
                        : norm_s == "nclt" ? sim::Normalization::Nclt
                                           : sim::Normalization::Auto;
      c.limit_samples = static_cast<std::size_t>(parse_count(limit_samples_s, "limit-samples"));
      const auto res = sim::simulate_limits(c);
      Result r;
      r.table = Table{{"quantity", "empirical", "stderr", "reference"}, {}};
      for (const auto& row : res.rows)
        r.table->rows.push_back({row.quantity, row.empirical, row.stderr_,
                                 row.reference ? Cell(*row.reference) : Cell(std::monostate{})});
      r.method = "mc";
      r.seed = sim_seed;
      r.meta = meta_json(res.meta);
      return r;
    });
  }

  // ---- parse and dispatch
  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error[usage]: " << msg << "\n";
    return 2;
  }
  if (!action) {
    err << "error[usage]: no subcommand given\n";
    return 2;
  }
  if (threads > 0) set_max_threads(threads);
  try {
    Result r = action();
    r.meta["version"] = kVersion;
    if (r.seed) r.meta["seed"] = *r.seed;
    const Format fmt = format == "json" ? Format::Json : format == "csv" ? Format::Csv : Format::Default;
    if (!output_path.empty()) {
      std::ofstream f(output_path);
      if (!f) throw UsageError("cannot write '" + output_path + "'");
      render(r, fmt, f);
    } else {
      render(r, fmt, out);
    }
  } catch (const Error& e) {
    err << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    err << "error[size]: out of memory\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace wignerlab::cli
