#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "momentda/maxent.hpp"
#include "momentda/metrics.hpp"
#include "oracles.hpp"

using namespace momentda;

namespace {
std::vector<double> random_lambda(std::mt19937_64& g, std::size_t n, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<double> v(n);
  for (auto& x : v) x = u(g);
  return v;
}
}  // namespace

TEST(Maxent, ZeroMomentsGiveUniform) {
  const TensorBasis b(2, 4);
  const auto fit = fit_maxent(MomentVector(b, std::vector<double>(b.size(), 0.0)));
  ASSERT_TRUE(fit.ok());
  EXPECT_EQ(fit.iterations, 0);
  for (double l : fit.density.lambda()) EXPECT_EQ(l, 0.0);
  EXPECT_NEAR(fit.dual_value, 0.0, 1e-15);
  EXPECT_NEAR(entropy(fit.density), 0.0, 1e-15);
}

TEST(Maxent, TruncatedNormalIsItsOwnProjection) {
  const auto p = make_truncated_normal(0.45, 0.15);
  const auto fit = fit_maxent(moments(p, TensorBasis(1, 2)));
  ASSERT_TRUE(fit.ok()) << fit.message;
  EXPECT_LE(fit.residual, 1e-9);
  const oracle::TruncNormal tn{0.45L, 0.15L};
  const auto rule = gauss_rule(256);
  const double l1 = integrate_1d([&](double t) { return std::abs(fit.density.factor(0, t) - double(tn.pdf(t))); }, rule);
  EXPECT_LE(l1, 1e-6);
  // exp(-l1 eta1 - l2 eta2) is Gaussian only with a positive quadratic coefficient
  EXPECT_GT(fit.density.lambda()[1], 0.0);
}

TEST(Maxent, RecoversKnownParameters) {
  std::mt19937_64 g(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 1 + trial % 3;
    const int m = 2 + trial % 4;
    const TensorBasis b(dim, m);
    const ExpFamilyDensity p0(b, random_lambda(g, b.size(), 1.0));
    const auto fit = fit_maxent(moments(p0));
    ASSERT_TRUE(fit.ok()) << trial << " " << fit.message;
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(fit.density.lambda()[i], p0.lambda()[i], 1e-7) << trial;
    const auto back = moments(fit.density);
    const auto mu = moments(p0);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(back[i], mu[i], 1e-9);
  }
}

TEST(Maxent, EntropyDominates) {
  const TensorBasis b(1, 3);
  for (double sigma : {0.05, 0.1, 0.2, 0.4}) {
    const auto p = make_truncated_normal(0.35, sigma, 256);
    EXPECT_GE(maxent_entropy(p, b), entropy(p) - 1e-8) << sigma;
  }
  const auto mix = make_mixture({make_truncated_normal(0.3, 0.1), make_truncated_normal(0.7, 0.1)}, {0.5, 0.5});
  EXPECT_GE(maxent_entropy(mix, b), entropy(mix) - 1e-8);
  EXPECT_NEAR(maxent_entropy(make_uniform(1), b), 0.0, 1e-14);
}

TEST(Maxent, GaussianEntropyIsReproducedByQuadraticFit) {
  const auto p = make_truncated_normal(0.5, 0.2);
  EXPECT_NEAR(maxent_entropy(p, TensorBasis(1, 2)), entropy(p), 1e-7);
  EXPECT_NEAR(epsilon_gap(p, TensorBasis(1, 2)), 0.0, 1e-8);
}

TEST(Maxent, FamilyMembersHaveZeroGap) {
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 10; ++trial) {
    const TensorBasis b(2, 3);
    const ExpFamilyDensity p(b, random_lambda(g, b.size(), 1.5));
    const double gap = epsilon_gap(p, b);
    EXPECT_GE(gap, 0.0);
    EXPECT_LE(gap, 1e-8);
  }
}

TEST(Maxent, MixtureGapIsPositiveAndEqualsDivergence) {
  const auto mix = make_mixture({make_truncated_normal(0.3, 0.1), make_truncated_normal(0.7, 0.1)}, {0.5, 0.5});
  const TensorBasis b(1, 2);
  const double gap = epsilon_gap(mix, b);
  EXPECT_GT(gap, 0.0);
  const auto fit = fit_maxent(moments(mix, b), FitOptions{.order = mix.grid().rule(0).order()});
  ASSERT_TRUE(fit.ok());
  EXPECT_NEAR(gap, kl_divergence(mix, detail::grid_of(fit.density)), 1e-7);
}

TEST(Maxent, FitIsInvariantUnderOrthonormalRotation) {
  const int m = 4;
  const auto p = make_truncated_normal(0.3, 0.12);
  const auto mu = moments(p, TensorBasis(1, m));
  const auto fit = fit_maxent(mu);
  ASSERT_TRUE(fit.ok());

  const QuadRule1D rule = gauss_rule(128);
  const Eigen::MatrixXd f = detail::legendre_features(TensorBasis(1, m).per_dim(), rule);
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), rule.order());
  std::mt19937_64 g(3);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = n01(g);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  const Eigen::VectorXd target = q.transpose() * Eigen::Map<const Eigen::VectorXd>(mu.values().data(), m);
  const auto rot = solve_dual(f * q, w, target, FitOptions{});
  ASSERT_EQ(rot.status, FitStatus::kConverged);

  const Eigen::VectorXd log_q = -(f * q * rot.lambda).array() - rot.log_partition;
  double l1 = 0.0;
  for (int a_ = 0; a_ < rule.order(); ++a_) {
    l1 += rule.weights[a_] * std::abs(std::exp(log_q(a_)) - fit.density.factor(0, rule.nodes[a_]));
  }
  EXPECT_LE(l1, 1e-7);
}

TEST(Maxent, DualDecreasesMonotonically) {
  std::mt19937_64 g(11);
  const TensorBasis b(2, 5);
  const ExpFamilyDensity p0(b, random_lambda(g, b.size(), 2.5));
  const auto fit = fit_maxent(moments(p0));
  ASSERT_TRUE(fit.ok());
  ASSERT_EQ(fit.dual_traces.size(), 2u);
  for (const auto& tr : fit.dual_traces) {
    ASSERT_GE(tr.size(), 2u);
    for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LE(tr[i], tr[i - 1] + 1e-14 * std::max(1.0, std::abs(tr[i - 1])));
    EXPECT_LE(tr.back(), 0.0);  // Gamma(0) = 0 and the optimum is no larger
  }
}

TEST(Maxent, JointFitEqualsSeparateFits) {
  std::mt19937_64 g(5);
  for (int trial = 0; trial < 3; ++trial) {
    const TensorBasis b(2, 3);
    const ExpFamilyDensity p0(b, random_lambda(g, b.size(), 1.0), gauss_rule(64));
    const auto mu = moments(p0);
    const auto sep = fit_maxent(mu, FitOptions{.tol = 1e-12, .order = 64});
    const auto joint = fit_maxent_joint(mu, QuadGridND::with_order(2, 64), FitOptions{.tol = 1e-12});
    ASSERT_TRUE(sep.ok());
    ASSERT_EQ(joint.status, FitStatus::kConverged);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(joint.lambda[i], sep.density.lambda()[i], 1e-9);
    double lz = 0.0;
    for (double c : sep.density.log_norm()) lz -= c;
    EXPECT_NEAR(joint.log_partition, lz, 1e-9);
  }
}

TEST(Maxent, OutOfRangeMomentsAreInfeasible) {
  const TensorBasis b(1, 2);
  const auto fit = fit_maxent(MomentVector(b, {2.0, 0.0}));
  EXPECT_EQ(fit.status, FitStatus::kInfeasible);
  EXPECT_FALSE(fit.ok());
}

TEST(Maxent, UnrealizableMomentsAreNotConverged) {
  // eta1 near its maximum forces mass near x=1, where eta2 = sqrt(5)
  const auto fit = fit_maxent(MomentVector(TensorBasis(1, 2), {1.72, -1.0}));
  EXPECT_NE(fit.status, FitStatus::kConverged);
}

TEST(Maxent, IterationCapIsReported) {
  const auto mu = moments(make_truncated_normal(0.2, 0.05, 256), TensorBasis(1, 4));
  const auto fit = fit_maxent(mu, FitOptions{.max_iter = 1});
  EXPECT_EQ(fit.status, FitStatus::kMaxIterations);
  EXPECT_GT(fit.residual, 1e-9);
  EXPECT_NE(fit.message.find("max_iter"), std::string::npos);
}

TEST(Maxent, InvalidOptionsRejected) {
  const MomentVector mu(TensorBasis(1, 2), {0.0, 0.0});
  EXPECT_THROW(fit_maxent(mu, FitOptions{.tol = 0.0}), InvalidArgument);
  EXPECT_THROW(fit_maxent(mu, FitOptions{.max_iter = 0}), InvalidArgument);
}

TEST(Maxent, ResultSerializesStatusAndLambda) {
  const auto fit = fit_maxent(moments(make_truncated_normal(0.5, 0.2), TensorBasis(1, 2)));
  const nlohmann::json j = fit;
  EXPECT_EQ(j["status"], "converged");
  EXPECT_EQ(j["lambda"].size(), 2u);
  EXPECT_TRUE(j.contains("residual"));
  EXPECT_TRUE(j.contains("iterations"));
  EXPECT_EQ(std::string(to_string(FitStatus::kMaxIterations)), "max_iterations");
}
