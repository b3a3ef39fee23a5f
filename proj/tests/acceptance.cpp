// Acceptance run: one PASS/FAIL line per criterion with the measured values.
// Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <wignerlab.hpp>

#include "oracle.hpp"

using namespace wignerlab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= budget_s;
  const bool pass = out.pass && in_time;
  if (!pass) ++failures;
  std::printf("[%s] %2d %s: %s (%.2f s, budget %.0f s%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              out.detail.c_str(), secs, budget_s, in_time ? "" : ", over budget");
  std::fflush(stdout);
}

bool within(double a, double b, double rel, double abs_extra) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_extra;
}

moments::LimitMethod mc(std::uint64_t seed, std::uint64_t samples = 1000000) {
  moments::LimitMethod m;
  m.kind = moments::Method::MC;
  m.samples = samples;
  m.seed = seed;
  return m;
}

}  // namespace

int main() {
  criterion(1, "lattice moments match the Wick oracle", 60, [] {
    std::mt19937_64 eng(2024);
    int cases = 0, bad = 0;
    double worst = 0.0;
    for (int model_i = 0; model_i < 20; ++model_i) {
      const auto model = wignerlab::testing::random_table_model(eng);
      for (int q = 1; q <= 3; ++q)
        for (int p = 2; p <= 4; ++p)
          for (long long n = 1; n <= 5; ++n) {
            const std::vector<int> qs(static_cast<std::size_t>(p), q);
            const std::vector<double> ts(static_cast<std::size_t>(p), 1.0);
            const double want = wignerlab::testing::wick_oracle(qs, ts, n, model);
            const double got = moments::exact_joint_moment(qs, ts, n, model).value;
            ++cases;
            const double scale = std::max({std::abs(want), std::abs(got), 1e-300});
            if (!(want == 0.0 && got == 0.0)) worst = std::max(worst, std::abs(got - want) / scale);
            if (!wignerlab::testing::rel_close(got, want, 1e-10)) ++bad;
          }
    }
    return Outcome{bad == 0, std::to_string(cases) + " cases, " + std::to_string(bad) +
                                 " mismatches, worst relative error " + fmt(worst, 3)};
  });

  criterion(2, "alpha matrix fixture for q=(3,2,4,3), r=(1,2,3)", 1, [] {
    const combinat::BlockProfile profile({3, 2, 4, 3});
    const auto a = combinat::alpha_matrix(profile, {1, 2, 3});
    const auto flat = a.flattened();
    std::string s;
    for (int v : flat) s += std::to_string(v) + " ";
    const bool ok = flat == std::vector<int>{1, 1, 1, 1, 0, 2} && a.total() == 6 && 2 * a.total() == profile.total();
    return Outcome{ok, "alpha = " + s + "sum = " + std::to_string(a.total())};
  });

  criterion(3, "variance identities (MC limit and kernel norm)", 60, [] {
    const auto r = moments::limit_joint_moment(2, 0.7, {1.0, 1.0}, mc(42));
    const double se = *r.stderr_;
    const auto norm = kernels::kernel_l2_norm_sq(kernels::KernelSpec{2, 0.7, 1.0}, 2048);
    const bool ok = std::abs(r.value - 1.0) <= 3.0 * se && se <= 0.005 * std::abs(r.value) &&
                    std::abs(norm.refined - 1.0) <= 0.01;
    return Outcome{ok, "MC " + fmt(r.value) + " +- " + fmt(se, 3) + ", kernel norm " + fmt(norm.refined, 8) +
                           " (grid value " + fmt(norm.grid, 6) + ")"};
  });

  criterion(4, "fourth-moment triangle (limit MC, cumulants, lattice n=200)", 300, [] {
    const auto lim = moments::limit_joint_moment(2, 0.7, {1, 1, 1, 1}, mc(42));
    const double se = *lim.stderr_;
    const double cum = kernels::rosenblatt_moments_via_cumulants(0.7, 1.0, 1024, 4)[3];
    const auto model = CovarianceModel::power_law(0.3);
    const auto c = moments::nclt_constants(2, 0.3, SlowlyVarying::constant(), 200);
    const double lattice = moments::exact_joint_moment({2, 2, 2, 2}, {1, 1, 1, 1}, 200, model).value /
                           std::pow(c.normalization, 4) / std::pow(c.limit_coeff, 4);
    const bool mc_cum = within(lim.value, cum, 0.03, 3.0 * se);
    const bool mc_lat = within(lim.value, lattice, 0.03, 3.0 * se);
    const bool cum_lat = within(cum, lattice, 0.03, 0.0);
    return Outcome{mc_cum && mc_lat && cum_lat,
                   "limit MC " + fmt(lim.value) + " +- " + fmt(se, 3) + ", k4+2k2^2 " + fmt(cum) + ", lattice " +
                       fmt(lattice) + "; pairs MC-cum " + (mc_cum ? "ok" : "off") + ", MC-lattice " +
                       (mc_lat ? "ok" : "off") + ", cum-lattice " + (cum_lat ? "ok" : "off")};
  });

  criterion(5, "NCLT scaled second moment convergence", 10, [] {
    const auto res = moments::converge(2, 0.3, SlowlyVarying::constant(), 2, {1000, 10000, 100000},
                                       CovarianceModel::power_law(0.3));
    bool monotone = true;
    std::string s;
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
      s += "n=" + std::to_string(res.rows[i].n) + ": " + fmt(res.rows[i].scaled_moment) + "; ";
      if (i > 0 && !(res.rows[i].abs_err < res.rows[i - 1].abs_err)) monotone = false;
    }
    const double rel = res.rows.back().abs_err / res.limit;
    return Outcome{monotone && rel <= 0.02,
                   s + "limit " + fmt(res.limit) + ", final relative error " + fmt(rel, 3)};
  });

  criterion(6, "U_3 term negligible against U_2 at n=1e5", 10, [] {
    const auto model = CovarianceModel::power_law(0.3);
    const auto c = moments::nclt_constants(2, 0.3, SlowlyVarying::constant(), 100000);
    const double n2 = c.normalization * c.normalization;
    const double u2 = moments::exact_joint_moment({2, 2}, {1, 1}, 100000, model).value / n2;
    const double u3 = moments::exact_joint_moment({3, 3}, {1, 1}, 100000, model).value / n2;
    return Outcome{u3 <= 0.05 * u2, "U_2 term " + fmt(u2) + ", U_3 term " + fmt(u3) + ", ratio " + fmt(u3 / u2, 4)};
  });

  criterion(7, "Karamata ratio at n=1e6", 5, [] {
    const double rc = moments::karamata_ratio(2, 0.3, SlowlyVarying::constant(), 1000000);
    const double rl = moments::karamata_ratio(2, 0.3, SlowlyVarying::log(), 1000000);
    const bool ok_c = std::abs(rc - 1.0) <= 0.01, ok_l = std::abs(rl - 1.0) <= 0.03;
    return Outcome{ok_c && ok_l, "L=const " + fmt(rc) + (ok_c ? " ok" : " off") + ", L=log " + fmt(rl) +
                                     (ok_l ? " ok" : " off")};
  });

  criterion(8, "CLT side: exact variance, classical MC, free/classical ratio", 120, [] {
    const auto model = CovarianceModel::geometric(0.5);
    const auto cv = moments::clt_variance(poly::single_term(poly::Basis::Tchebycheff, 2), model);
    const bool exact_ok = std::abs(cv.free_value - 5.0 / 3.0) <= 1e-14;

    sim::LimitsConfig cc;
    cc.kind = sim::LimitKind::Classical;
    cc.expansion = poly::single_term(poly::Basis::Hermite, 2);
    cc.model = model;
    cc.n_time = 10000;
    cc.reps = 500;
    cc.seed = 7;
    const auto cres = sim::simulate_limits(cc);
    const auto& crow = cres.rows.front();  // m2(t=1)
    const bool classical_ok = std::abs(crow.empirical - 10.0 / 3.0) <= 0.05 * (10.0 / 3.0);

    sim::LimitsConfig fc;
    fc.kind = sim::LimitKind::Free;
    fc.expansion = poly::single_term(poly::Basis::Tchebycheff, 2);
    fc.model = model;
    fc.n_time = 400;
    fc.matrix_n = 200;
    fc.reps = 50;
    fc.seed = 7;
    const auto fres = sim::simulate_limits(fc);
    const auto& frow = fres.rows.front();
    const double ratio = frow.empirical / crow.empirical;
    const bool ratio_ok = std::abs(ratio - 0.5) <= 0.05;
    return Outcome{exact_ok && classical_ok && ratio_ok,
                   "free variance " + fmt(cv.free_value, 17) + (exact_ok ? " ok" : " off") + ", classical MC " +
                       fmt(crow.empirical) + " +- " + fmt(crow.stderr_, 3) + (classical_ok ? " ok" : " off") +
                       ", free MC " + fmt(frow.empirical) + " +- " + fmt(frow.stderr_, 3) + ", ratio " + fmt(ratio) +
                       (ratio_ok ? " ok" : " off")};
  });

  criterion(9, "GOE simulator moments and asymptotic freeness", 180, [] {
    sim::MatrixEnsembleConfig cfg;
    cfg.n = 300;
    cfg.reps = 100;
    cfg.times = {1.0};
    cfg.seed = 7;
    const auto m2 = sim::estimate_poly_moment(cfg, {0, 0, 1}, 1.0);
    const auto m3 = sim::estimate_poly_moment(cfg, {0, 0, 0, 1}, 1.0);
    const auto m4 = sim::estimate_poly_moment(cfg, {0, 0, 0, 0, 1}, 1.0);
    const bool moments_ok =
        std::abs(m2.value - 1.0) <= 0.02 && std::abs(m4.value - 2.0) <= 0.05 && std::abs(m3.value) <= 0.05;
    const std::vector<double> sq{0, 0, 1};
    std::vector<sim::FreenessResult> fr;
    std::string s;
    for (std::size_t n : {50u, 100u, 300u}) {
      sim::MatrixEnsembleConfig f = cfg;
      f.n = n;
      f.times = {1.0, 2.0};
      fr.push_back(sim::asymptotic_freeness_check(f, {sq, sq, sq, sq}, {0, 1, 0, 1}));
      s += "n=" + std::to_string(n) + ": " + fmt(fr.back().value, 4) + " +- " + fmt(fr.back().stderr_, 3) + "; ";
    }
    const bool small = std::abs(fr.back().value) <= 3.0 * fr.back().stderr_;
    const bool decreasing =
        std::abs(fr[1].value) < std::abs(fr[0].value) && std::abs(fr[2].value) < std::abs(fr[1].value);
    return Outcome{moments_ok && small && decreasing,
                   "tau(M^2) " + fmt(m2.value) + ", tau(M^3) " + fmt(m3.value, 3) + ", tau(M^4) " + fmt(m4.value) +
                       (moments_ok ? " ok" : " off") + "; freeness " + s + "within 3 stderr " +
                       (small ? "yes" : "no") + ", decreasing " + (decreasing ? "yes" : "no")};
  });

  criterion(10, "trace powers equal eigenvalue power sums (1024 grid)", 60, [] {
    const auto op = kernels::reduced_operator(0.7, 1.0, 1024);
    const auto rows = kernels::free_cumulants_trace(op, 6);
    double worst = 0.0;
    for (const auto& r : rows)
      worst = std::max(worst, std::abs(r.via_trace - r.via_eigen) / std::abs(r.via_eigen));
    const double k2 = rows.front().via_trace;
    return Outcome{worst <= 1e-9 && std::abs(k2 - 1.0) <= 0.02,
                   "worst relative disagreement " + fmt(worst, 3) + ", kappa_2 " + fmt(k2)};
  });

  criterion(11, "rank divergence of x^4 - 3x^2 + 1", 1, [] {
    const auto u = poly::to_exact({1, 0, -3, 0, 1}, poly::Basis::Tchebycheff);
    const auto h = poly::to_exact({1, 0, -3, 0, 1}, poly::Basis::Hermite);
    const bool ok = u.rank == 4u && h.rank == 2u;
    return Outcome{ok, "Tchebycheff rank " + std::to_string(u.rank.value_or(0)) + ", Hermite rank " +
                           std::to_string(h.rank.value_or(0))};
  });

  criterion(12, "self-similarity of limit moments", 120, [] {
    const double H = 0.7;
    struct Case {
      int q, p;
      double a;
    };
    bool ok = true;
    std::string s;
    std::uint64_t seed = 101;
    for (const Case& c : {Case{1, 2, 2.0}, Case{2, 2, 2.0}, Case{2, 4, 1.5}}) {
      const auto base = moments::limit_joint_moment(c.q, H, std::vector<double>(c.p, 1.0), mc(seed++));
      const auto scaled = moments::limit_joint_moment(c.q, H, std::vector<double>(c.p, c.a), mc(seed++));
      const double f = std::pow(c.a, c.p * H);
      const double se = std::hypot(*scaled.stderr_, f * *base.stderr_);
      const bool this_ok = std::abs(scaled.value - f * base.value) <= 3.0 * se;
      ok = ok && this_ok;
      s += "(q=" + std::to_string(c.q) + ",p=" + std::to_string(c.p) + ",a=" + fmt(c.a, 2) +
           "): ratio " + fmt(scaled.value / base.value) + " vs " + fmt(f) + (this_ok ? " ok" : " off") + "; ";
    }
    return Outcome{ok, s};
  });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
