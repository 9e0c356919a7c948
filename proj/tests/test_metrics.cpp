#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "momentda/maxent.hpp"
#include "momentda/metrics.hpp"
#include "momentda/random.hpp"
#include "oracles.hpp"

using namespace momentda;

namespace {
ExpFamilyDensity random_expfam(std::mt19937_64& g, int dim, int m, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  const TensorBasis b(dim, m);
  std::vector<double> lam(b.size());
  for (auto& v : lam) v = u(g);
  return ExpFamilyDensity(b, lam);
}
}  // namespace

TEST(Metrics, L1OfIdenticalDensitiesIsZero) {
  const auto p = make_truncated_normal(0.3, 0.2);
  EXPECT_NEAR(l1_distance(p, p), 0.0, 1e-15);
}

TEST(Metrics, L1LiesInZeroTwo) {
  std::mt19937_64 g(1);
  for (int i = 0; i < 20; ++i) {
    const double d = l1_distance(random_expfam(g, 2, 3, 3.0), random_expfam(g, 2, 3, 3.0));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
  }
}

TEST(Metrics, NearlyDisjointNormalsHaveL1NearTwo) {
  const auto p = make_truncated_normal(0.4, 0.01, 512);
  const auto q = make_truncated_normal(0.6, 0.01, 512);
  EXPECT_GE(l1_distance(p, q), 1.99);
}

TEST(Metrics, L1MatchesClosedFormForShiftedNormals) {
  // equal-sigma normals cross at the midpoint; the L1 distance follows from CDFs
  const oracle::TruncNormal a{0.4L, 0.1L}, b{0.6L, 0.1L};
  const double want = static_cast<double>(2.0L * ((a.cdf(0.5L) - b.cdf(0.5L))));
  // |p - q| has a kink at the crossing, so Gauss converges only algebraically
  EXPECT_NEAR(l1_distance(make_truncated_normal(0.4, 0.1), make_truncated_normal(0.6, 0.1)), want, 1e-3);
  EXPECT_NEAR(l1_distance(make_truncated_normal(0.4, 0.1, 512), make_truncated_normal(0.6, 0.1, 512)), want, 1e-4);
}

TEST(Metrics, DimensionMismatchThrows) {
  EXPECT_THROW(l1_distance(make_uniform(1), make_uniform(2)), InvalidArgument);
  EXPECT_THROW(kl_divergence(make_uniform(1), make_uniform(2)), InvalidArgument);
  EXPECT_THROW(moment_l1(MomentVector(TensorBasis(1, 2), {0, 0}), MomentVector(TensorBasis(1, 3), {0, 0, 0})),
               InvalidArgument);
}

TEST(Metrics, KlOfIdenticalDensitiesIsZero) {
  const auto p = make_truncated_normal(0.3, 0.2);
  EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-14);
}

TEST(Metrics, KlAgainstUniformIsNegativeEntropy) {
  for (double s : {0.1, 0.2, 0.5}) {
    const auto p = make_truncated_normal(0.35, s);
    EXPECT_NEAR(kl_divergence(p, make_uniform(1, p.grid().rule(0).order())), -entropy(p), 1e-8);
  }
}

TEST(Metrics, PinskerHoldsOnRandomPairs) {
  std::mt19937_64 g(42);
  for (int i = 0; i < 100; ++i) {
    const int dim = 1 + i % 2;
    const auto p = random_expfam(g, dim, 3, 2.0);
    const auto q = random_expfam(g, dim, 3, 2.0);
    const double l1 = l1_distance(p, q);
    const double kl = kl_divergence(p, q);
    EXPECT_GE(kl, 0.5 * l1 * l1 - 1e-12) << i;
    EXPECT_LE(l1, std::sqrt(2.0 * kl) + 1e-12) << i;
  }
}

TEST(Metrics, ClosedFormKlMatchesQuadrature) {
  std::mt19937_64 g(9);
  for (int i = 0; i < 50; ++i) {
    const int dim = 1 + i % 3;
    const auto p = random_expfam(g, dim, 3, 1.5);
    const auto q = random_expfam(g, dim, 3, 1.5);
    const double cf = kl_expfam_closed_form(p, q);
    const double quad = kl_divergence(detail::grid_of(p), detail::grid_of(q));
    EXPECT_NEAR(cf, quad, 1e-7) << i;
  }
}

TEST(Metrics, ClosedFormKlSpecialCases) {
  std::mt19937_64 g(10);
  const auto p = random_expfam(g, 2, 3, 1.0);
  EXPECT_NEAR(kl_expfam_closed_form(p, p), 0.0, 1e-14);
  const ExpFamilyDensity u(p.basis(), std::vector<double>(p.basis().size(), 0.0));
  EXPECT_NEAR(kl_expfam_closed_form(p, u), -entropy(p), 1e-8);
  EXPECT_THROW(kl_expfam_closed_form(p, random_expfam(g, 2, 4, 1.0)), InvalidArgument);
}

TEST(Metrics, MomentL1Examples) {
  const MomentVector a(TensorBasis(1, 3), {0.1, -0.2, 0.3});
  EXPECT_EQ(moment_l1(a, a), 0.0);
  EXPECT_NEAR(moment_l1(moments(make_uniform(1), TensorBasis(1, 1)), moments(make_truncated_normal(0.5, 0.2), TensorBasis(1, 1))),
              0.0, 1e-13);
  const auto mq = moments(make_truncated_normal(0.4, 0.15), TensorBasis(1, 5));
  const auto want = oracle::eta_moments(oracle::TruncNormal{0.4L, 0.15L}.raw_moments(5), 5);
  double l1 = 0.0;
  for (auto v : want) l1 += std::abs(static_cast<double>(v));
  const double got = moment_l1(moments(make_uniform(1), TensorBasis(1, 5)), mq);
  EXPECT_GT(got, 0.0);
  EXPECT_NEAR(got, l1, 1e-9);
}

TEST(Metrics, SampleMomentErrorDecaysAtRootK) {
  const auto p = make_truncated_normal(0.4, 0.15);
  const TensorBasis b(1, 3);
  const auto mu = moments(p, b);
  std::vector<double> lk, le;
  std::uint64_t seed = 100;
  for (std::size_t k : {100u, 1000u, 10000u, 100000u, 1000000u}) {
    double acc = 0.0;
    const int reps = 8;
    for (int r = 0; r < reps; ++r) acc += moment_l1(sample_moments(draw_sample(p, k, seed++), b), mu);
    lk.push_back(std::log(double(k)));
    le.push_back(std::log(acc / reps));
  }
  const double n = static_cast<double>(lk.size());
  const double mx = std::accumulate(lk.begin(), lk.end(), 0.0) / n;
  const double my = std::accumulate(le.begin(), le.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lk.size(); ++i) {
    sxy += (lk[i] - mx) * (le[i] - my);
    sxx += (lk[i] - mx) * (lk[i] - mx);
  }
  EXPECT_NEAR(sxy / sxx, -0.5, 0.1);
}

TEST(Metrics, CmdHandExamples) {
  const auto x = make_sample(1, {0.0, 1.0});
  const auto y = make_sample(1, {0.5, 0.5});
  EXPECT_NEAR(cmd(x, y, 1), 0.0, 1e-15);
  EXPECT_NEAR(cmd(x, y, 2), 0.25, 1e-15);
  EXPECT_NEAR(cmd(x, x, 5), 0.0, 1e-15);
  // third central moment of {0,1} vanishes; fourth is 1/16
  EXPECT_NEAR(cmd(x, y, 4), 0.25 + 0.0625, 1e-15);
  EXPECT_THROW(cmd(Sample{1, {}, 0}, y, 1), InvalidArgument);
  EXPECT_THROW(cmd(x, y, 0), InvalidArgument);
}

TEST(Metrics, CmdIsPermutationInvariant) {
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u;
  std::vector<double> a(2 * 50), b(2 * 40);
  for (auto& v : a) v = u(g);
  for (auto& v : b) v = u(g);
  const double base = cmd(make_sample(2, a), make_sample(2, b), 5);
  std::vector<int> idx(50);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), g);
  std::vector<double> ap;
  for (int i : idx) ap.insert(ap.end(), {a[2 * i], a[2 * i + 1]});
  EXPECT_NEAR(cmd(make_sample(2, ap), make_sample(2, b), 5), base, 1e-14);
}

TEST(Metrics, CmdIsEuclideanAcrossDimensions) {
  const auto x = make_sample(2, {0.0, 0.2, 1.0, 0.2});
  const auto y = make_sample(2, {0.5, 0.5, 0.5, 0.5});
  // means (0.5,0.2) vs (0.5,0.5); variances (0.25,0) vs (0,0)
  EXPECT_NEAR(cmd(x, y, 1), 0.3, 1e-15);
  EXPECT_NEAR(cmd(x, y, 2), 0.3 + 0.25, 1e-15);
}

TEST(Metrics, PopulationCmdMatchesLargeSamples) {
  const auto p = make_truncated_normal(0.4, 0.15);
  const auto q = make_truncated_normal(0.55, 0.2);
  const double pop = cmd(p, q, 4);
  const double emp = cmd(draw_sample(p, 400000, std::uint64_t{1}), draw_sample(q, 400000, std::uint64_t{2}), 4);
  EXPECT_NEAR(pop, emp, 5e-3);
  EXPECT_NEAR(cmd(p, p, 4), 0.0, 1e-14);
}

TEST(Metrics, LevyOfIdenticalCdfsIsZero) {
  const auto c = cdf_of(make_truncated_normal(0.5, 0.2));
  EXPECT_EQ(levy_metric(c, c), 0.0);
}

TEST(Metrics, LevyMatchesExhaustiveSearch) {
  const oracle::TruncNormal tn{0.5L, 0.2L};
  auto P = [](double x) { return std::clamp(x, 0.0, 1.0); };
  auto Q = [&](double x) { return static_cast<double>(tn.cdf(x)); };
  // smallest eps on a 1e-5 grid satisfying the corridor on 10^4 points
  auto holds = [&](double eps) {
    for (int i = 0; i <= 10000; ++i) {
      const double x = i / 10000.0;
      if (P(x - eps) - eps > Q(x) || Q(x) > P(x + eps) + eps) return false;
    }
    return true;
  };
  double brute = -1.0;
  for (int s = 0; s <= 100000 && brute < 0; s += 100)
    if (holds(s * 1e-5)) {
      for (int t = std::max(0, s - 100); t <= s; ++t)
        if (holds(t * 1e-5)) {
          brute = t * 1e-5;
          break;
        }
    }
  ASSERT_GT(brute, 0.0);
  const double got = levy_metric(cdf_of(make_uniform(1)), cdf_of(make_truncated_normal(0.5, 0.2)));
  EXPECT_NEAR(got, brute, 1e-4);
  EXPECT_GE(got, 0.0);
  EXPECT_LE(got, 1.0);
}

TEST(Metrics, LevyIsBoundedByOne) {
  const auto a = cdf_of(make_truncated_normal(0.02, 0.01, 512));
  const auto b = cdf_of(make_truncated_normal(0.98, 0.01, 512));
  const double d = levy_metric(a, b);
  EXPECT_GT(d, 0.4);
  EXPECT_LE(d, 1.0);
}

TEST(Metrics, NonMonotoneCdfRejected) {
  EXPECT_THROW(TabulatedCdf({0.0, 0.5, 1.0}, {0.0, 0.7, 0.6}), InvalidArgument);
}

TEST(Metrics, RiskExamples) {
  const auto u = make_uniform(2);
  const auto f = threshold_classifier(0, 0.5);
  EXPECT_NEAR(risk(f, labeling_from(f), u), 0.0, 1e-15);
  EXPECT_NEAR(risk(constant_classifier(0), labeling_from(constant_classifier(1)), u), 1.0, 1e-12);
  const Labeling above{[](std::span<const double> x) { return x[0] > 0.5 ? 1.0 : 0.0; }, "x0 > 1/2"};
  EXPECT_NEAR(risk(f, above, u), 0.0, 1e-12);
  // threshold at 0.3 against labels at 0.5: the strip (0.3, 0.5] has mass 0.2
  EXPECT_NEAR(risk(threshold_classifier(0, 0.3), above, make_uniform(1)), 0.2, 1e-2);
}

TEST(Metrics, EmpiricalRiskExamples) {
  const auto x = make_sample(1, {0.1, 0.4, 0.6, 0.9});
  const auto f = threshold_classifier(0, 0.5);
  EXPECT_EQ(empirical_risk(f, labeling_from(f), x), 0.0);
  EXPECT_EQ(empirical_risk(constant_classifier(0), labeling_from(constant_classifier(1)), x), 1.0);
  EXPECT_EQ(empirical_risk(constant_classifier(1), labeling_from(f), x), 0.5);
  const Labeling half{[](std::span<const double>) { return 0.5; }, "half"};
  EXPECT_EQ(empirical_risk(f, half, x), 0.5);
  EXPECT_THROW(empirical_risk(f, half, Sample{1, {}, 0}), InvalidArgument);
}

TEST(Metrics, WorstCaseGapIsHalfL1) {
  std::mt19937_64 g(77);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (int i = 0; i < 20; ++i) {
    const auto p = make_truncated_normal(u(g), 0.05 + 0.3 * u(g));
    const auto q = make_truncated_normal(u(g), 0.05 + 0.3 * u(g));
    const auto f = i % 3 == 0 ? constant_classifier(i % 2) : threshold_classifier(0, u(g), i % 2);
    const auto wc = worst_case_labeling(f, p, q);
    EXPECT_NEAR(wc.gap, 0.5 * l1_distance(p, q), 1e-8) << i;
  }
  const auto p = make_truncated_normal(0.4, 0.1);
  EXPECT_NEAR(worst_case_labeling(threshold_classifier(0, 0.5), p, p).gap, 0.0, 1e-15);
}

TEST(Metrics, NoLabelingBeatsTheWorstCase) {
  const auto p = make_product({make_truncated_normal(0.4, 0.2, 32), make_truncated_normal(0.5, 0.3, 32)});
  const auto q = make_product({make_truncated_normal(0.6, 0.15, 32), make_truncated_normal(0.45, 0.25, 32)});
  const auto f = threshold_classifier(1, 0.5);
  const double best = worst_case_labeling(f, p, q).gap;
  EXPECT_NEAR(best, 0.5 * l1_distance(p, q), 1e-8);
  std::mt19937_64 g(123);
  std::uniform_real_distribution<double> u;
  for (int i = 0; i < 200; ++i) {
    const double a = u(g), b = u(g), c = u(g), t = u(g);
    const int kind = i % 4;
    Labeling l{[=](std::span<const double> x) {
                 switch (kind) {
                   case 0: return x[0] > t ? a : b;
                   case 1: return std::clamp(a + (b - a) * x[0] + (c - 0.5) * x[1], 0.0, 1.0);
                   case 2: return 0.5 + 0.5 * std::sin(10.0 * a * x[0] + 7.0 * b * x[1] + c);
                   default: return (x[0] - t) * (x[1] - a) > 0 ? 1.0 : 0.0;
                 }
               },
               "random"};
    EXPECT_LE(labeling_gap(f, l, p, q), best + 1e-8) << i;
  }
}
