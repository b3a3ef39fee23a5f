#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <wignerlab/sim.hpp>

using namespace wignerlab;
using sim::Mat;

namespace {
sim::MatrixEnsembleConfig small_ensemble(std::size_t n, std::vector<double> times, std::size_t reps = 10) {
  sim::MatrixEnsembleConfig c;
  c.n = n;
  c.times = std::move(times);
  c.reps = reps;
  c.seed = 3;
  return c;
}

const sim::LimitRow& row(const sim::LimitsResult& r, const std::string& name) {
  for (const auto& x : r.rows)
    if (x.quantity == name) return x;
  throw std::runtime_error("missing row " + name);
}
}  // namespace

TEST(Sim, MatrixBrownianMotionIsSymmetricAndReproducible) {
  const auto cfg = small_ensemble(40, {0.5, 1.0});
  const auto a = sim::matrix_bm_replication(cfg, 2);
  const auto b = sim::matrix_bm_replication(cfg, 2);
  ASSERT_EQ(a.size(), 2u);
  for (const auto& m : a) EXPECT_LT((m - m.transpose()).norm(), 1e-14);
  EXPECT_EQ((a[1] - b[1]).norm(), 0.0);
  const auto c = sim::matrix_bm_replication(cfg, 3);
  EXPECT_GT((a[1] - c[1]).norm(), 0.0);
}

TEST(Sim, SecondMomentTracksTime) {
  // tau_n(M(t)^2) = t (1 + 1/n) in expectation for this real ensemble.
  const auto cfg = small_ensemble(80, {0.5, 2.0}, 20);
  for (double t : {0.5, 2.0}) {
    const auto r = sim::estimate_poly_moment(cfg, {0, 0, 1}, t);
    EXPECT_NEAR(r.value, t * (1.0 + 1.0 / 80.0), 4.0 * *r.stderr_ + 1e-3) << t;
  }
  EXPECT_THROW(sim::estimate_poly_moment(cfg, {0, 0, 1}, 0.7), DomainError);
}

TEST(Sim, FourthMomentIsNearSemicircular) {
  const auto cfg = small_ensemble(150, {1.0}, 10);
  const auto r = sim::estimate_poly_moment(cfg, {0, 0, 0, 0, 1}, 1.0);
  EXPECT_NEAR(r.value, 2.0, 0.1);
  const auto odd = sim::estimate_poly_moment(cfg, {0, 0, 0, 1}, 1.0);
  EXPECT_NEAR(odd.value, 0.0, 0.05);
}

TEST(Sim, TraceStateProperties) {
  Mat a = Mat::Random(6, 6), b = Mat::Random(6, 6);
  EXPECT_NEAR(sim::trace_state(Mat(a * b)), sim::trace_state(Mat(b * a)), 1e-14);
  EXPECT_NEAR(sim::trace_state(Mat::Identity(5, 5)), 1.0, 1e-15);
  EXPECT_THROW(sim::trace_state(Mat(Mat::Zero(2, 3))), DomainError);
  Mat s = a + a.transpose(), u = b + b.transpose();
  EXPECT_NEAR(sim::trace_state_product(s, u), sim::trace_state(Mat(s * u)), 1e-13);
}

TEST(Sim, PolynomialOfMatrix) {
  Mat m(2, 2);
  m << 1, 2, 2, 0;
  const Mat p = sim::poly_of_matrix({1, -1, 1}, m);  // I - M + M^2
  const Mat want = Mat::Identity(2, 2) - m + m * m;
  EXPECT_LT((p - want).norm(), 1e-14);
}

TEST(Sim, FreenessCheckInputErrors) {
  const auto one_time = small_ensemble(20, {1.0}, 2);
  EXPECT_THROW(sim::asymptotic_freeness_check(one_time, {{0, 1}, {0, 1}}, {0, 0}), DomainError);
  const auto two = small_ensemble(20, {1.0, 2.0}, 2);
  EXPECT_THROW(sim::asymptotic_freeness_check(two, {{0, 1}, {0, 1}}, {0, 0}), DomainError);
  EXPECT_THROW(sim::asymptotic_freeness_check(two, {{0, 1}, {0, 1}, {0, 1}}, {0, 1, 0}), DomainError);
  EXPECT_THROW(sim::asymptotic_freeness_check(two, {{0, 1}}, {0, 1}), DomainError);
  EXPECT_THROW(sim::asymptotic_freeness_check(two, {{0, 1}, {0, 1}}, {0, 5}), DomainError);
}

TEST(Sim, FreenessStatisticIsSmall) {
  const auto cfg = small_ensemble(100, {1.0, 2.0}, 10);
  const std::vector<double> x{0, 1};
  const auto r = sim::asymptotic_freeness_check(cfg, {x, x, x, x}, {0, 1, 0, 1});
  EXPECT_LT(std::abs(r.value), 0.05);
  EXPECT_EQ(r.reps, 10u);
  EXPECT_EQ(r.centers.size(), 4u);
}

TEST(Sim, FamilyGramFollowsCovariance) {
  sim::CorrelatedFamilyConfig cfg;
  cfg.m = 4;
  cfg.matrix_n = 60;
  cfg.reps = 20;
  cfg.model = CovarianceModel::geometric(0.5);
  const auto grams = sim::family_gram(cfg);
  Mat mean = Mat::Zero(4, 4);
  for (const auto& g : grams) mean += g / static_cast<double>(grams.size());
  for (int k = 0; k < 4; ++k)
    for (int l = 0; l < 4; ++l) {
      const double want = std::pow(0.5, std::abs(k - l)) * (1.0 + 1.0 / 60.0);
      EXPECT_NEAR(mean(k, l), want, 0.03) << k << "," << l;
    }
}

TEST(Sim, FamilyMembersAreSemicircular) {
  sim::CorrelatedFamilyConfig cfg;
  cfg.m = 3;
  cfg.matrix_n = 120;
  cfg.reps = 4;
  const auto fam = sim::sample_correlated_family(cfg);
  double m4 = 0.0;
  int count = 0;
  for (const auto& rep : fam)
    for (const auto& x : rep) {
      const Mat x2 = x * x;
      m4 += sim::trace_state_product(x2, x2);
      ++count;
    }
  EXPECT_NEAR(m4 / count, 2.0, 0.15);
}

TEST(Sim, ToeplitzFactorRejectsIndefiniteModel) {
  const auto model = CovarianceModel::table({1.0, 0.9});
  EXPECT_THROW(sim::toeplitz_factor(model, 3), DomainError);
  const auto ok = sim::toeplitz_factor(CovarianceModel::geometric(0.3), 5);
  EXPECT_EQ(ok.method, "cholesky");
  const Mat T = ok.C * ok.C.transpose();
  EXPECT_NEAR(T(0, 2), 0.09, 1e-14);
}

TEST(Sim, SequenceSamplerCovariance) {
  const sim::GaussianSequenceSampler sampler(CovarianceModel::geometric(0.5), 64);
  auto eng = rng::stream(11, 0);
  std::vector<double> x;
  double c0 = 0.0, c1 = 0.0, c5 = 0.0;
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    sampler.sample(eng, x);
    ASSERT_EQ(x.size(), 64u);
    c0 += x[10] * x[10];
    c1 += x[10] * x[11];
    c5 += x[30] * x[35];
  }
  EXPECT_NEAR(c0 / reps, 1.0, 0.08);
  EXPECT_NEAR(c1 / reps, 0.5, 0.06);
  EXPECT_NEAR(c5 / reps, 1.0 / 32.0, 0.05);
}

TEST(Sim, RegimeSelection) {
  const auto u2 = poly::single_term(poly::Basis::Tchebycheff, 2);
  EXPECT_EQ(sim::regime_of(u2, CovarianceModel::power_law(0.3)), sim::Normalization::Nclt);
  EXPECT_EQ(sim::regime_of(u2, CovarianceModel::power_law(0.7)), sim::Normalization::Clt);
  EXPECT_EQ(sim::regime_of(u2, CovarianceModel::geometric(0.5)), sim::Normalization::Clt);
  EXPECT_THROW(sim::regime_of(u2, CovarianceModel::power_law(0.5)), DomainError);
}

TEST(Sim, LimitsConfigurationErrors) {
  sim::LimitsConfig cfg;
  cfg.n_time = 20;
  cfg.matrix_n = 10;
  cfg.reps = 2;
  cfg.normalization = sim::Normalization::Nclt;
  EXPECT_THROW(sim::simulate_limits(cfg), DomainError);
  cfg.normalization = sim::Normalization::Auto;
  cfg.kind = sim::LimitKind::Classical;
  EXPECT_THROW(sim::simulate_limits(cfg), DomainError);  // Tchebycheff basis for the classical side
}

TEST(Sim, FreeCltSecondMomentMatchesFiniteMatrixReference) {
  sim::LimitsConfig cfg;
  cfg.n_time = 60;
  cfg.matrix_n = 40;
  cfg.reps = 20;
  cfg.model = CovarianceModel::geometric(0.5);
  const auto res = sim::simulate_limits(cfg);
  const auto& fm = row(res, "m2_finite_matrix(t=1)");
  ASSERT_TRUE(fm.reference);
  EXPECT_NEAR(fm.empirical, *fm.reference, 4.0 * fm.stderr_ + 0.01);
  EXPECT_EQ(res.meta.at("centering"), "trace");
  EXPECT_EQ(res.regime, sim::Normalization::Clt);
}

TEST(Sim, ClassicalCltSecondMoment) {
  sim::LimitsConfig cfg;
  cfg.kind = sim::LimitKind::Classical;
  cfg.expansion = poly::single_term(poly::Basis::Hermite, 2);
  cfg.n_time = 200;
  cfg.reps = 2000;
  cfg.model = CovarianceModel::geometric(0.5);
  const auto res = sim::simulate_limits(cfg);
  const auto& m2 = row(res, "m2(t=1)");
  EXPECT_NEAR(m2.empirical, *m2.reference, 4.0 * m2.stderr_);
  const auto again = sim::simulate_limits(cfg);
  EXPECT_EQ(row(again, "m2(t=1)").empirical, m2.empirical);
}

TEST(Sim, SummarizeStatistics) {
  const auto s = sim::summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.stderr_, std::sqrt(5.0 / 3.0 / 4.0), 1e-14);
  EXPECT_EQ(s.count, 4u);
}
