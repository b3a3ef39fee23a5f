#pragma once

// Stationary correlation models rho on the integers and slowly varying factors.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace wignerlab {

struct SlowlyVarying {
  enum class Kind { Const, Log, PowerOfLog, LogLog };
  Kind kind = Kind::Const;
  double param = 1.0;  // Const: c; Log: offset; PowerOfLog: exponent

  static SlowlyVarying constant(double c = 1.0) {
    if (!(c > 0.0)) throw DomainError("constant slowly varying factor must be positive");
    return {Kind::Const, c};
  }
  /// log(x + offset), offset >= 1.
  static SlowlyVarying log(double offset = 1.0) {
    if (!(offset >= 1.0)) throw DomainError("log offset must be >= 1");
    return {Kind::Log, offset};
  }
  /// log(x + e)^exponent.
  static SlowlyVarying power_of_log(double exponent) { return {Kind::PowerOfLog, exponent}; }
  /// log(e + log(x + 1)).
  static SlowlyVarying loglog() { return {Kind::LogLog, 0.0}; }

  double operator()(double x) const {
    switch (kind) {
      case Kind::Const: return param;
      case Kind::Log: return std::log(x + param);
      case Kind::PowerOfLog: return std::pow(std::log(x + std::numbers::e), param);
      case Kind::LogLog: return std::log(std::numbers::e + std::log(x + 1.0));
    }
    return param;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind) {
      case Kind::Const: os << "const:" << param; break;
      case Kind::Log: os << "log(x+" << param << ")"; break;
      case Kind::PowerOfLog: os << "log(x+e)^" << param; break;
      case Kind::LogLog: os << "loglog"; break;
    }
    return os.str();
  }
};

class CovarianceModel {
 public:
  struct Delta {};
  struct Geometric {
    double a;
  };
  struct PowerLaw {
    double D;
    SlowlyVarying L;
  };
  struct Table {
    std::vector<double> values;  // values[k] = rho(k), k >= 0; zero beyond
  };
  using Variant = std::variant<Delta, Geometric, PowerLaw, Table>;

  static CovarianceModel delta() { return CovarianceModel(Delta{}); }
  static CovarianceModel geometric(double a) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("geometric parameter a must lie in (0,1)");
    return CovarianceModel(Geometric{a});
  }
  static CovarianceModel power_law(double D, SlowlyVarying L = SlowlyVarying::constant()) {
    if (!(D > 0.0 && D < 1.0)) throw DomainError("power-law exponent D must lie in (0,1)");
    return CovarianceModel(PowerLaw{D, L});
  }
  static CovarianceModel table(std::vector<double> values) {
    if (values.empty() || values[0] != 1.0) throw DomainError("table model needs rho(0) = 1");
    for (double v : values)
      if (!(std::abs(v) <= 1.0)) throw DomainError("table model needs |rho(k)| <= 1");
    return CovarianceModel(Table{std::move(values)});
  }

  const Variant& variant() const { return v_; }
  bool is_delta() const { return std::holds_alternative<Delta>(v_); }
  bool is_geometric() const { return std::holds_alternative<Geometric>(v_); }
  bool is_power_law() const { return std::holds_alternative<PowerLaw>(v_); }
  bool is_table() const { return std::holds_alternative<Table>(v_); }

  double operator()(long long k) const {
    const long long a = k < 0 ? -k : k;
    if (a == 0) return 1.0;
    return std::visit(
        [a](const auto& m) -> double {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Delta>) {
            return 0.0;
          } else if constexpr (std::is_same_v<M, Geometric>) {
            return std::pow(m.a, static_cast<double>(a));
          } else if constexpr (std::is_same_v<M, PowerLaw>) {
            const double x = static_cast<double>(a);
            return std::pow(x, -m.D) * m.L(x);
          } else {
            return static_cast<std::size_t>(a) < m.values.size() ? m.values[a] : 0.0;
          }
        },
        v_);
  }

  /// rho(0..n-1) in one pass.
  std::vector<double> lags(std::size_t n) const {
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = (*this)(static_cast<long long>(k));
    return out;
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, Delta>)
            os << "delta";
          else if constexpr (std::is_same_v<M, Geometric>)
            os << "geometric:a=" << m.a;
          else if constexpr (std::is_same_v<M, PowerLaw>)
            os << "powerlaw:D=" << m.D << ",L=" << m.L.describe();
          else
            os << "table:" << m.values.size() << " lags";
        },
        v_);
    return os.str();
  }

 private:
  explicit CovarianceModel(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

namespace detail {
inline double parse_double(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw UsageError("cannot parse " + what + " from '" + s + "'");
  return v;
}
}  // namespace detail

/// Reads a CSV of `lag,value` rows (header optional); negative lags are folded by symmetry.
inline CovarianceModel load_table_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open covariance table '" + path + "'");
  std::map<long long, double> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw UsageError("table row without comma: '" + line + "'");
    const std::string ls = line.substr(0, comma), vs = line.substr(comma + 1);
    char* end = nullptr;
    const long long lag = std::strtoll(ls.c_str(), &end, 10);
    if (end == ls.c_str()) {
      if (entries.empty()) continue;  // header
      throw UsageError("bad lag in table row '" + line + "'");
    }
    const double v = detail::parse_double(vs, "table value");
    const long long a = lag < 0 ? -lag : lag;
    auto it = entries.find(a);
    if (it != entries.end() && it->second != v)
      throw DomainError("table gives two values for lag " + std::to_string(a));
    entries[a] = v;
  }
  if (entries.empty()) throw UsageError("covariance table '" + path + "' is empty");
  std::vector<double> values(static_cast<std::size_t>(entries.rbegin()->first) + 1, 0.0);
  for (auto [k, v] : entries) values[static_cast<std::size_t>(k)] = v;
  if (entries.find(0) == entries.end()) values[0] = 1.0;
  return CovarianceModel::table(std::move(values));
}

/// Grammar: delta | geometric:a=<f> | powerlaw:D=<f>[,L=const[:c]|log|loglog] | table:<path>
inline CovarianceModel parse_covariance_model(const std::string& spec) {
  if (spec == "delta") return CovarianceModel::delta();
  if (spec.rfind("geometric:a=", 0) == 0)
    return CovarianceModel::geometric(detail::parse_double(spec.substr(12), "geometric a"));
  if (spec.rfind("table:", 0) == 0) return load_table_model(spec.substr(6));
  if (spec.rfind("powerlaw:D=", 0) == 0) {
    std::string rest = spec.substr(11);
    std::string dstr = rest, lstr;
    const auto comma = rest.find(',');
    if (comma != std::string::npos) {
      dstr = rest.substr(0, comma);
      lstr = rest.substr(comma + 1);
    }
    const double D = detail::parse_double(dstr, "power-law D");
    SlowlyVarying L = SlowlyVarying::constant();
    if (!lstr.empty()) {
      if (lstr.rfind("L=", 0) != 0) throw UsageError("expected L=... in '" + spec + "'");
      const std::string l = lstr.substr(2);
      if (l == "const")
        L = SlowlyVarying::constant();
      else if (l.rfind("const:", 0) == 0)
        L = SlowlyVarying::constant(detail::parse_double(l.substr(6), "constant c"));
      else if (l == "log")
        L = SlowlyVarying::log();
      else if (l == "loglog")
        L = SlowlyVarying::loglog();
      else
        throw UsageError("unknown slowly varying factor '" + l + "'");
    }
    return CovarianceModel::power_law(D, L);
  }
  throw UsageError("unknown covariance model '" + spec + "'");
}

}  // namespace wignerlab
