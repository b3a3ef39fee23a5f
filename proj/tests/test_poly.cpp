#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <wignerlab/freecalc.hpp>
#include <wignerlab/poly.hpp>

using namespace wignerlab;
using poly::Basis;

TEST(Poly, TchebychevValues) {
  EXPECT_DOUBLE_EQ(poly::tcheb_u(3, 2.0), 4.0);  // x^3 - 2x
  EXPECT_DOUBLE_EQ(poly::tcheb_u(0, 0.3), 1.0);
  EXPECT_DOUBLE_EQ(poly::tcheb_u(1, 0.3), 0.3);
  EXPECT_DOUBLE_EQ(poly::tcheb_u(2, 0.5), -0.75);  // x^2 - 1
}

TEST(Poly, HermiteValues) {
  EXPECT_DOUBLE_EQ(poly::hermite_h(2, 3.0), 8.0);   // x^2 - 1
  EXPECT_DOUBLE_EQ(poly::hermite_h(3, 2.0), 2.0);   // x^3 - 3x
  EXPECT_DOUBLE_EQ(poly::hermite_h(4, 1.0), -2.0);  // x^4 - 6x^2 + 3
}

TEST(Poly, RecursionHolds) {
  for (double x : {-1.7, -0.2, 0.0, 0.9, 2.5})
    for (unsigned k = 1; k < 12; ++k) {
      EXPECT_NEAR(x * poly::tcheb_u(k, x), poly::tcheb_u(k + 1, x) + poly::tcheb_u(k - 1, x), 1e-9);
      EXPECT_NEAR(x * poly::hermite_h(k, x), poly::hermite_h(k + 1, x) + k * poly::hermite_h(k - 1, x),
                  1e-6 * (1 + std::abs(x * poly::hermite_h(k, x))));
    }
}

TEST(Poly, RankDivergesBetweenBases) {
  const std::vector<long long> c{1, 0, -3, 0, 1};  // x^4 - 3x^2 + 1
  const auto u = poly::to_exact(c, Basis::Tchebycheff);
  const auto h = poly::to_exact(c, Basis::Hermite);
  ASSERT_TRUE(u.rank && h.rank);
  EXPECT_EQ(*u.rank, 4u);
  EXPECT_EQ(*h.rank, 2u);
  EXPECT_EQ(u.coeffs[4], 1);
  EXPECT_EQ(h.coeffs[0], 1);
  EXPECT_EQ(h.coeffs[2], 3);
  EXPECT_EQ(h.coeffs[4], 1);
}

TEST(Poly, DecomposeRoundTrip) {
  const std::vector<double> c{0.5, -1.25, 2.0, 0.0, 3.5, -0.75};
  for (Basis b : {Basis::Tchebycheff, Basis::Hermite}) {
    const auto e = poly::decompose(c, b);
    const auto back = poly::reconstruct(e);
    ASSERT_EQ(back.size(), c.size());
    for (std::size_t d = 0; d < c.size(); ++d) EXPECT_NEAR(back[d], c[d], 1e-12);
    for (double x : {-1.3, 0.4, 2.2})
      EXPECT_NEAR(poly::eval(e, x), poly::eval_monomial(c, x), 1e-10);
  }
}

TEST(Poly, ExactAndFloatingAgree) {
  const std::vector<long long> c{3, -2, 0, 7, -1, 0, 2};
  for (Basis b : {Basis::Tchebycheff, Basis::Hermite}) {
    const auto ex = poly::to_exact(c, b);
    const auto fl = poly::decompose(std::vector<double>(c.begin(), c.end()), b);
    ASSERT_EQ(ex.coeffs.size(), fl.coeffs.size());
    for (std::size_t s = 0; s < fl.coeffs.size(); ++s)
      EXPECT_DOUBLE_EQ(ex.coeffs[s].convert_to<double>(), fl.coeffs[s]);
    EXPECT_EQ(ex.rank, fl.rank);
  }
}

TEST(Poly, ConstantHasNoRank) {
  const auto e = poly::to_exact({5}, Basis::Tchebycheff);
  EXPECT_FALSE(e.rank.has_value());
  EXPECT_TRUE(poly::single_term(Basis::Hermite, 3).rank.has_value());
}

TEST(Poly, DegreeLimit) {
  std::vector<double> c(70, 0.0);
  c.back() = 1.0;
  EXPECT_THROW(poly::decompose(c, Basis::Tchebycheff), SizeError);
}

TEST(Poly, TchebychevOrthonormalUnderSemicircle) {
  // phi(U_m U_n) = delta_mn for the standard semicircle.
  const freecalc::SemicircleLaw law;
  for (unsigned m = 0; m <= 6; ++m)
    for (unsigned n = 0; n <= 6; ++n) {
      const auto rows_m = poly::basis_matrix<double>(Basis::Tchebycheff, m);
      const auto rows_n = poly::basis_matrix<double>(Basis::Tchebycheff, n);
      double s = 0.0;
      for (unsigned a = 0; a <= m; ++a)
        for (unsigned b = 0; b <= n; ++b)
          s += rows_m[m][a] * rows_n[n][b] * freecalc::semicircle_moment(law, static_cast<int>(a + b));
      EXPECT_NEAR(s, m == n ? 1.0 : 0.0, 1e-9) << m << "," << n;
    }
}

TEST(Poly, HermiteOrthogonalUnderGaussian) {
  // E[H_m H_n] = n! delta_mn; Gaussian moments are double factorials.
  auto gauss = [](unsigned k) {
    if (k % 2) return 0.0;
    double v = 1.0;
    for (unsigned j = k - 1; j >= 1 && j < k; j -= 2) v *= j;
    return v;
  };
  for (unsigned m = 0; m <= 5; ++m)
    for (unsigned n = 0; n <= 5; ++n) {
      const auto rm = poly::basis_matrix<double>(Basis::Hermite, m);
      const auto rn = poly::basis_matrix<double>(Basis::Hermite, n);
      double s = 0.0;
      for (unsigned a = 0; a <= m; ++a)
        for (unsigned b = 0; b <= n; ++b) s += rm[m][a] * rn[n][b] * gauss(a + b);
      EXPECT_NEAR(s, m == n ? std::tgamma(n + 1.0) : 0.0, 1e-9) << m << "," << n;
    }
}
