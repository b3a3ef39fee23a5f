#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <wignerlab/freecalc.hpp>
#include <wignerlab/quadrature.hpp>

using namespace wignerlab;
using freecalc::SemicircleLaw;

namespace {
freecalc::CovMatrix cov2(double a, double b, double c) {
  linalg::Matrix m(2, 2);
  m(0, 0) = a;
  m(0, 1) = m(1, 0) = b;
  m(1, 1) = c;
  return freecalc::CovMatrix(m);
}
}  // namespace

TEST(Freecalc, CatalanNumbers) {
  const std::vector<double> expected{1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862};
  for (int k = 0; k < 10; ++k) EXPECT_EQ(freecalc::catalan(k), expected[static_cast<std::size_t>(k)]);
}

TEST(Freecalc, SemicircleMoments) {
  const SemicircleLaw law;
  EXPECT_EQ(freecalc::semicircle_moment(law, 4), 2.0);
  EXPECT_EQ(freecalc::semicircle_moment(law, 6), 5.0);
  EXPECT_EQ(freecalc::semicircle_moment(law, 5), 0.0);
  const SemicircleLaw scaled(0.0, 2.0);
  EXPECT_DOUBLE_EQ(freecalc::semicircle_moment(scaled, 4), 8.0);
}

TEST(Freecalc, SemicircleAffineShift) {
  // X = m + sigma S: E[X] = m, E[X^2] = m^2 + var, E[X^3] = m^3 + 3 m var.
  const SemicircleLaw law(1.5, 0.5);
  EXPECT_DOUBLE_EQ(freecalc::semicircle_moment(law, 1), 1.5);
  EXPECT_NEAR(freecalc::semicircle_moment(law, 2), 2.25 + 0.5, 1e-14);
  EXPECT_NEAR(freecalc::semicircle_moment(law, 3), 3.375 + 3 * 1.5 * 0.5, 1e-13);
  EXPECT_THROW(SemicircleLaw(0.0, 0.0), DomainError);
  EXPECT_THROW(freecalc::semicircle_moment(law, 65), DomainError);
}

TEST(Freecalc, DensityIntegratesToMoments) {
  const SemicircleLaw law(0.3, 1.7);
  const double r = 2.0 * law.sigma();
  for (int k : {0, 2, 3}) {
    const auto res = quad::adaptive_simpson(
        [&](double x) { return std::pow(x, k) * freecalc::semicircle_density(law, x); }, law.mean - r,
        law.mean + r, 1e-11);
    EXPECT_NEAR(res.value, freecalc::semicircle_moment(law, k), 1e-6) << k;
  }
  EXPECT_EQ(freecalc::semicircle_density(law, 10.0), 0.0);
}

TEST(Freecalc, WickAlternatingWord) {
  const auto g = cov2(1.0, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(freecalc::wick_joint_moment(g, {0, 1, 0, 1}), 0.5);  // only (14)(23)
  EXPECT_DOUBLE_EQ(freecalc::wick_joint_moment(g, {0, 0, 1, 1}), 1.25);
  EXPECT_DOUBLE_EQ(freecalc::wick_joint_moment(g, {0, 0, 0, 0}), 2.0);
  EXPECT_EQ(freecalc::wick_joint_moment(g, {0, 1, 0}), 0.0);
  EXPECT_EQ(freecalc::wick_joint_moment(g, {}), 1.0);
}

TEST(Freecalc, WickSingleVariableGivesCatalan) {
  const auto g = cov2(1.0, 0.0, 1.0);
  for (int k = 1; k <= 8; ++k)
    EXPECT_DOUBLE_EQ(freecalc::wick_joint_moment(g, std::vector<int>(2 * static_cast<std::size_t>(k), 0)),
                     freecalc::catalan(k));
}

TEST(Freecalc, WickRejectsBadInput) {
  EXPECT_THROW(cov2(1.0, 2.0, 1.0), DomainError);  // indefinite
  const auto g = cov2(1.0, 0.2, 1.0);
  EXPECT_THROW(freecalc::wick_joint_moment(g, {0, 2}), DomainError);
  EXPECT_THROW(freecalc::wick_joint_moment(g, std::vector<int>(18, 0)), SizeError);
  linalg::Matrix asym(2, 2);
  asym(0, 0) = asym(1, 1) = 1.0;
  asym(0, 1) = 0.3;
  EXPECT_THROW(freecalc::CovMatrix{asym}, DomainError);
}

TEST(Freecalc, CumulantMomentRoundTrip) {
  const std::vector<double> kappa{0.3, 1.2, -0.4, 0.7, 0.1, -0.2, 0.05};
  const auto m = freecalc::free_moments_from_cumulants(kappa, 7);
  const auto back = freecalc::cumulants_from_moments(m);
  ASSERT_EQ(back.size(), kappa.size());
  for (std::size_t i = 0; i < kappa.size(); ++i) EXPECT_NEAR(back[i], kappa[i], 1e-12);
}

TEST(Freecalc, SemicircleHasOnlySecondCumulant) {
  std::vector<double> m;
  for (int k = 1; k <= 10; ++k) m.push_back(freecalc::semicircle_moment(SemicircleLaw{}, k));
  const auto kappa = freecalc::cumulants_from_moments(m);
  for (std::size_t i = 0; i < kappa.size(); ++i) EXPECT_NEAR(kappa[i], i == 1 ? 1.0 : 0.0, 1e-12);
}

TEST(Freecalc, FreePoissonMomentsAreCatalan) {
  // All free cumulants equal to one: moments are Catalan numbers C_n.
  const auto m = freecalc::free_moments_from_cumulants(std::vector<double>(8, 1.0), 8);
  for (int n = 1; n <= 8; ++n) EXPECT_EQ(m[static_cast<std::size_t>(n - 1)], freecalc::catalan(n));
  EXPECT_THROW(freecalc::free_moment_from_cumulants({1.0}, 13), DomainError);
}
