#include <cmath>
#include <cstring>
#include <numbers>

#include <gtest/gtest.h>

#include "momentda/density.hpp"
#include "momentda/polybasis.hpp"
#include "momentda/quadrature.hpp"
#include "oracles.hpp"

using namespace momentda;

TEST(Quadrature, TwoPointRule) {
  const auto r = gauss_rule(2);
  ASSERT_EQ(r.order(), 2);
  const double h = 1.0 / (2.0 * std::sqrt(3.0));
  EXPECT_NEAR(r.nodes[0], 0.5 - h, 1e-15);
  EXPECT_NEAR(r.nodes[1], 0.5 + h, 1e-15);
  EXPECT_NEAR(r.weights[0], 0.5, 1e-15);
  EXPECT_NEAR(r.weights[1], 0.5, 1e-15);
}

TEST(Quadrature, WeightsSumToOneAndNodesInsideInterval) {
  for (int n : {2, 3, 7, 16, 32, 64, 100, 128, 256, 512}) {
    const auto r = gauss_rule(n);
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      s += r.weights[i];
      EXPECT_GT(r.nodes[i], 0.0);
      EXPECT_LT(r.nodes[i], 1.0);
      EXPECT_GT(r.weights[i], 0.0);
      if (i > 0) EXPECT_LT(r.nodes[i - 1], r.nodes[i]);
    }
    EXPECT_NEAR(s, 1.0, 1e-13) << n;
  }
}

TEST(Quadrature, ExactForPolynomialsUpToDegreeTwoNMinusOne) {
  for (int n = 1; n <= 11; ++n) {
    if (n < 2) continue;
    const auto r = gauss_rule(n);
    for (int deg = 0; deg <= std::min(2 * n - 1, 20); ++deg) {
      const double v = integrate_1d([deg](double x) { return std::pow(x, deg); }, r);
      EXPECT_NEAR(v, 1.0 / (deg + 1), 1e-14) << "n=" << n << " deg=" << deg;
    }
  }
}

TEST(Quadrature, SixteenPointRuleFifthPower) {
  const double v = integrate_1d([](double x) { return x * x * x * x * x; }, gauss_rule(16));
  EXPECT_NEAR(v, 1.0 / 6.0, 1e-15);
}

TEST(Quadrature, ExponentialIntegral) {
  const double v = integrate_1d([](double x) { return std::exp(x); }, gauss_rule(64));
  EXPECT_NEAR(v, std::numbers::e - 1.0, 1e-13);
}

TEST(Quadrature, OrderRangeEnforced) {
  EXPECT_THROW(gauss_rule(1), InvalidArgument);
  EXPECT_THROW(gauss_rule(kMaxGaussOrder + 1), InvalidArgument);
}

TEST(Quadrature, ConstantIntegratesToOneInSeveralDimensions) {
  for (int dim = 1; dim <= 3; ++dim) {
    EXPECT_NEAR(integrate([](std::span<const double>) { return 1.0; }, QuadGridND::default_for(dim)), 1.0, 1e-12);
  }
}

TEST(Quadrature, ProductWeightsSumToOne) {
  for (int dim : {2, 4, 5}) {
    const auto g = QuadGridND::default_for(dim);
    long double s = 0.0L;
    for (std::size_t i = 0; i < g.size(); ++i) s += g.weight(i);
    EXPECT_NEAR(static_cast<double>(s), 1.0, 1e-12) << dim;
  }
}

TEST(Quadrature, DefaultOrdersByDimension) {
  EXPECT_EQ(default_order(1), 128);
  EXPECT_EQ(default_order(3), 128);
  EXPECT_EQ(default_order(4), 32);
  EXPECT_EQ(default_order(5), 32);
}

TEST(Quadrature, ProductOfFirstDegreePolynomialsIntegratesToZero) {
  const auto b = build_legendre_basis(1);
  auto f = [&b](std::span<const double> x) { return b.eval_all(x[0])[1] * b.eval_all(x[1])[1]; };
  EXPECT_NEAR(integrate(f, QuadGridND::with_order(2, 16)), 0.0, 1e-12);
}

TEST(Quadrature, TruncatedNormalDensityIntegratesToOne) {
  const oracle::TruncNormal tn{0.4L, 0.1L};
  const double v = integrate([&](std::span<const double> x) { return static_cast<double>(tn.pdf(x[0])); },
                             QuadGridND::with_order(1, 128));
  EXPECT_NEAR(v, 1.0, 1e-10);
}

TEST(Quadrature, NonFiniteIntegrandReportsNode) {
  auto f = [](std::span<const double> x) { return x[0] > 0.5 ? std::nan("") : 1.0; };
  try {
    integrate(f, QuadGridND::with_order(1, 8));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("node ("), std::string::npos);
  }
}

TEST(Quadrature, IntegrationIsBitwiseDeterministic) {
  auto f = [](std::span<const double> x) { return std::sin(7 * x[0]) * std::exp(x[1]); };
  const auto g = QuadGridND::with_order(2, 64);
  const double a = integrate(f, g);
  const double b = integrate(f, g);
  EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
}

TEST(Quadrature, DoublingOrderChangesSmoothIntegralsBelowTolerance) {
  auto f = [](std::span<const double> x) { return std::exp(-3 * x[0]) * std::cos(5 * x[0]); };
  const auto r = integrate_checked(f, 1, 64);
  EXPECT_LE(r.self_convergence, 1e-10);
  auto rough = [](std::span<const double> x) { return std::abs(x[0] - 0.3137); };
  EXPECT_THROW(integrate_checked(rough, 1, 8, 1e-10), ResolutionError);
}
