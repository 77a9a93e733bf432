#include <gtest/gtest.h>

#include <numbers>

#include "compmm/problem.hpp"
#include "compmm/scalar.hpp"

using namespace compmm;

TEST(Minimize1d, SquareHitsGridPoint) {
  const auto m = minimize_1d([](double x) { return x * x; }, -3, 3, 7);
  EXPECT_EQ(m.x, 0.0);
  EXPECT_EQ(m.f, 0.0);
}

TEST(Minimize1d, RastriginGlobalMinimum) {
  const ScalarFn f = fns::rastrigin();
  const auto m = minimize_1d(f, -3, 3);
  // dense oracle
  double xb = 0, fb = kInfinity;
  for (int g = 0; g <= 1000000; ++g) {
    const double x = -3 + 6.0 * g / 1000000;
    if (f(x) < fb) fb = f(x), xb = x;
  }
  EXPECT_LT(std::abs(m.x), 1e-6);
  EXPECT_NEAR(m.f, -10.0, 1e-10);
  EXPECT_LE(m.f, fb);
  EXPECT_NEAR(xb, 0.0, 1e-5);
}

TEST(Minimize1d, ShiftedQuadraticVertex) {
  const auto m = minimize_1d([](double x) { return (x - 2.3) * (x - 2.3); }, -3, 3, 61);
  EXPECT_NEAR(m.x, 2.3, 1e-8);
}

TEST(Minimize1d, OffGridVertex) {
  const auto m = minimize_1d([](double x) { return (x - 0.123456789) * (x - 0.123456789) + 1; }, -3, 3, 64);
  EXPECT_NEAR(m.x, 0.123456789, 1e-8);
}

TEST(Minimize1d, GridDominance) {
  const ScalarFn f = fns::shifted(fns::neg_sinc(), 0.77);
  const UniformGrid grid(-3, 3, 257);
  const auto m = minimize_1d(f, -3, 3, 257);
  for (int g = 0; g < grid.n; ++g) EXPECT_LE(m.f, f(grid[g]));
  EXPECT_GE(m.x, -3);
  EXPECT_LE(m.x, 3);
}

TEST(Minimize1d, NanReportsAbscissa) {
  try {
    minimize_1d([](double x) { return x > 1.0 ? std::nan("") : x; }, -3, 3, 7);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.abscissa(), 2.0);
  }
}

TEST(Minimize1d, TiesGoToSmallerAbscissa) {
  const auto m = minimize_1d([](double x) { return std::abs(std::abs(x) - 1.0); }, -2, 2, 5, 0);
  EXPECT_EQ(m.x, -1.0);
}

TEST(Minimize1d, InfiniteValuesSkipped) {
  const auto m = minimize_1d([](double x) { return x < 0.5 ? kInfinity : (x - 1) * (x - 1); }, -3, 3);
  EXPECT_NEAR(m.x, 1.0, 1e-8);
}

TEST(Minimize1d, RefinementNeverWorse) {
  const ScalarFn f = fns::rastrigin();
  for (int n : {5, 17, 33, 129}) {
    const auto raw = minimize_1d(f, -2.2, 2.9, n, 0);
    const auto ref = minimize_1d(f, -2.2, 2.9, n, 8);
    EXPECT_LE(ref.f, raw.f);
  }
}

TEST(Minimize1d, HalvingSpacingOnUnimodal) {
  const auto f = [](double x) { return std::cosh(x - 0.7) + 0.1 * x; };
  double prev = kInfinity;
  for (int n : {5, 9, 17, 33, 65}) {
    const auto m = minimize_1d(f, -3, 3, n, 0);
    EXPECT_LE(m.f, prev);
    prev = m.f;
  }
}

TEST(Minimize1d, Deterministic) {
  const ScalarFn f = fns::shifted(fns::rastrigin(), 0.3);
  const auto a = minimize_1d(f, -3, 3), b = minimize_1d(f, -3, 3);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.f, b.f);
}

TEST(ParabolicRefine, Symmetric) { EXPECT_EQ(parabolic_refine(-1, 0, 1, 1, 0, 1), 0.0); }

TEST(ParabolicRefine, HandSolve) { EXPECT_DOUBLE_EQ(parabolic_refine(0, 1, 2, 0, -1, 0), 1.0); }

TEST(ParabolicRefine, ShiftedVertex) {
  const auto f = [](double x) { return (x - 0.3) * (x - 0.3); };
  EXPECT_NEAR(parabolic_refine(0, 0.5, 1, f(0), f(0.5), f(1)), 0.3, 1e-15);
}

TEST(ParabolicRefine, CollinearFallsBack) { EXPECT_EQ(parabolic_refine(-1, 0, 1, 2, 1, 0), 0.0); }

TEST(ParabolicRefine, ClampedToBracket) {
  // vertex of (x-5)^2 through points near 0 lies outside the bracket
  const auto f = [](double x) { return (x - 5) * (x - 5); };
  EXPECT_EQ(parabolic_refine(-1, 0, 1, f(-1), f(0), f(1)), 1.0);
}
