#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <wignerlab/kernels.hpp>
#include <wignerlab/moments.hpp>

using namespace wignerlab;
using kernels::KernelSpec;

TEST(Kernels, ClosedFormMatchesQuadrature) {
  const KernelSpec spec{1, 0.7, 1.0};
  for (double x : {-3.0, -0.5, 0.0, 0.25, 0.9})
    EXPECT_NEAR(kernels::kernel_eval_quadrature(spec, {x}).value,
                kernels::kernel_closed_form_q1(0.7, 1.0, x), 1e-7)
        << x;
  EXPECT_EQ(kernels::kernel_closed_form_q1(0.7, 1.0, 1.5), 0.0);
}

TEST(Kernels, SymmetricInArguments) {
  const KernelSpec spec{2, 0.75, 1.0};
  const double a = kernels::kernel_eval(spec, {-0.4, 0.3});
  const double b = kernels::kernel_eval(spec, {0.3, -0.4});
  EXPECT_NEAR(a, b, 1e-9);
  EXPECT_GT(a, 0.0);
  EXPECT_EQ(kernels::kernel_eval(spec, {1.2, 0.1}), 0.0);
}

TEST(Kernels, PointwiseScaling) {
  // f(at, a x) = a^{H - q/2} f(t, x).
  const double H = 0.7, a = 1.7;
  const std::vector<double> x{-0.3, 0.2};
  const double base = kernels::kernel_eval(KernelSpec{2, H, 1.0}, x);
  const double scaled = kernels::kernel_eval(KernelSpec{2, H, a}, {a * x[0], a * x[1]});
  EXPECT_NEAR(scaled / base, std::pow(a, H - 1.0), 1e-6);
}

TEST(Kernels, DiagonalIsInfinite) {
  EXPECT_THROW(kernels::kernel_eval(KernelSpec{2, 0.7, 1.0}, {0.5, 0.5}), DomainError);
  EXPECT_THROW(kernels::kernel_eval(KernelSpec{2, 0.7, 1.0}, {0.5}), DomainError);
  EXPECT_THROW(kernels::kernel_eval(KernelSpec{2, 0.4, 1.0}, {0.1, 0.2}), DomainError);
}

TEST(Kernels, NormIsOneAtUnitTime) {
  const auto n = kernels::kernel_l2_norm_sq(KernelSpec{2, 0.7, 1.0}, 2048);
  EXPECT_NEAR(n.refined, 1.0, 1e-3);
  EXPECT_EQ(n.analytic, 1.0);
  EXPECT_FALSE(n.coarse);
}

TEST(Kernels, NormSelfSimilarity) {
  for (int q : {1, 2, 3}) {
    const auto n = kernels::kernel_l2_norm_sq(KernelSpec{q, 0.8, 2.0}, 1024);
    EXPECT_NEAR(n.refined, std::pow(2.0, 1.6), 5e-3 * std::pow(2.0, 1.6)) << q;
  }
}

TEST(Kernels, RoughFirstOrderNorm) {
  const auto n = kernels::kernel_l2_norm_sq(KernelSpec{1, 0.3, 1.5});
  EXPECT_NEAR(n.refined, std::pow(1.5, 0.6), 1e-6);
}

TEST(Kernels, CovarianceOfFractionalMotion) {
  EXPECT_DOUBLE_EQ(kernels::ncfbm_cov(0.5, 0.3, 0.8), 0.3);
  EXPECT_THROW(kernels::ncfbm_cov(1.0, 0.3, 0.8), DomainError);
}

TEST(Kernels, TraceAndEigenCumulantsAgree) {
  const auto op = kernels::reduced_operator(0.7, 1.0, 256);
  const auto rows = kernels::free_cumulants_trace(op, 6);
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& r : rows) EXPECT_NEAR(r.via_trace, r.via_eigen, 1e-12 * std::abs(r.via_eigen));
  EXPECT_THROW(kernels::free_cumulants_trace(op, 11), DomainError);
}

TEST(Kernels, RefinedSecondCumulantIsNorm) {
  const auto k = kernels::refined_cumulants(0.7, 1.0, 512, 3);
  EXPECT_NEAR(k[0], 1.0, 2e-3);
}

TEST(Kernels, CumulantsReproduceThirdLimitMoment) {
  moments::LimitMethod m;
  m.kind = moments::Method::Quadrature;
  const double want = moments::limit_joint_moment(2, 0.7, {1, 1, 1}, m).value;
  const auto mom = kernels::rosenblatt_moments_via_cumulants(0.7, 1.0, 512, 3);
  EXPECT_NEAR(mom[0], 0.0, 1e-15);
  EXPECT_NEAR(mom[2], want, 0.02 * want);
}

TEST(Kernels, SpaceOperatorSecondCumulantIncreasesTowardNorm) {
  // A Galerkin projection never exceeds the Hilbert-Schmidt norm (= 1 at t = 1).
  auto kappa2 = [](std::size_t m) {
    kernels::SpaceGrid g;
    g.m = m;
    g.graded = true;
    g.x_min = -200.0;
    return kernels::free_cumulants_trace(kernels::discretize_operator(0.7, 1.0, g), 2)[0].via_trace;
  };
  const double coarse = kappa2(128), fine = kappa2(512);
  EXPECT_LT(coarse, fine);
  EXPECT_LT(fine, 1.0);
  EXPECT_GT(fine, 0.8);
}

TEST(Kernels, OperatorErrors) {
  EXPECT_THROW(kernels::reduced_operator(0.4, 1.0, 64), DomainError);
  EXPECT_THROW(kernels::reduced_operator(0.7, 1.0, 5000), SizeError);
  EXPECT_THROW(kernels::reduced_operator(0.7, -1.0, 64), DomainError);
}
