// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "momentda/momentda.hpp"

using namespace momentda;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o, double secs) {
  std::cout << (o.ok ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " (" << fmt(secs) << " s)";
  if (!o.detail.empty()) std::cout << " -- " << o.detail;
  std::cout << std::endl;
  if (!o.ok) ++failures;
}

std::vector<double> uniform_vector(std::mt19937_64& g, std::size_t n, double radius) {
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<double> v(n);
  for (auto& x : v) x = u(g);
  return v;
}

bool within(double v, double want, double tol) { return std::abs(v - want) <= tol; }

// 1 ------------------------------------------------------------------------
Outcome reference_constants() {
  Outcome o;
  const auto c = section7_constant();
  const double e = std::numbers::e;
  const double moment_coef = std::sqrt(2.0 * e * c.C);
  const double sampling_coef = std::sqrt(8.0 * c.C * 5.0 / 0.2);
  const double threshold = 1.0 / (2.0 * 6.0 * e * c.C);
  const double kmin = minimal_sample_size(c, 0.2);
  const auto cert = section7_certificate();
  o.require(within(moment_coef, 84.6, 0.5), "sqrt(2eC) = " + fmt(moment_coef));
  o.require(within(sampling_coef, 513.0, 2.0), "sqrt(8Cm/delta) = " + fmt(sampling_coef));
  o.require(within(threshold, 2.3e-5, 0.05 * 2.3e-5), "threshold = " + fmt(threshold));
  o.require(within(kmin, 6.3e9, 0.02 * 6.3e9), "k_min = " + fmt(kmin));
  o.require(within(cert.term("vc"), 2.95e-4, 0.02 * 2.95e-4), "vc = " + fmt(cert.term("vc")));
  const double sampling = cert.term("sampling");
  o.require(sampling >= 0.0140 && sampling <= 0.0150, "sampling = " + fmt(sampling));
  if (o.ok) {
    o.detail = "sqrt(2eC)=" + fmt(moment_coef) + " sqrt(8Cm/delta)=" + fmt(sampling_coef) + " threshold=" +
               fmt(threshold) + " k_min=" + fmt(kmin) + " vc=" + fmt(cert.term("vc")) + " sampling=" + fmt(sampling);
  }
  return o;
}

// 2 ------------------------------------------------------------------------
Outcome basis_exactness() {
  Outcome o;
  const auto b = build_legendre_basis(5);
  const auto g = gram_matrix(b);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) worst = std::max(worst, std::abs(g[i][j] - (i == j ? 1.0 : 0.0)));
  o.require(worst <= 1e-10, "Gram deviation " + fmt(worst));
  const std::vector<std::vector<long long>> expected = {
      {-1, 2}, {1, -6, 6}, {-1, 12, -30, 20}, {1, -20, 90, -140, 70}, {-1, 30, -210, 560, -630, 252}};
  for (int n = 1; n <= 5; ++n) {
    for (int p = 0; p <= n; ++p) {
      if (b.integer_coeff(n, p) != static_cast<decltype(b.integer_coeff(n, p))>(expected[n - 1][p])) {
        o.require(false, "eta_" + std::to_string(n) + " coefficient of x^" + std::to_string(p));
      }
    }
  }
  if (o.ok) o.detail = "max Gram deviation " + fmt(worst);
  return o;
}

// 3 ------------------------------------------------------------------------
Outcome maxent_correctness() {
  Outcome o;
  std::mt19937_64 g(20240601);
  double worst_lambda = 0.0;
  for (int t = 0; t < 50; ++t) {
    const TensorBasis basis(1 + t % 2, 1 + t % 5);
    const ExpFamilyDensity p(basis, uniform_vector(g, basis.size(), 1.0));
    const auto fit = fit_maxent(moments(p));
    if (!fit.ok()) {
      o.require(false, "round trip " + std::to_string(t) + " " + fit.message);
      continue;
    }
    for (std::size_t i = 0; i < basis.size(); ++i)
      worst_lambda = std::max(worst_lambda, std::abs(fit.density.lambda()[i] - p.lambda()[i]));
  }
  o.require(worst_lambda <= 1e-7, "lambda error " + fmt(worst_lambda));

  const auto tn = make_truncated_normal(0.45, 0.15);
  const auto fit = fit_maxent(moments(tn, TensorBasis(1, 2)));
  const double tn_l1 = fit.ok() ? l1_distance(tn, fit.density.to_grid(tn.grid())) : HUGE_VAL;
  o.require(tn_l1 <= 1e-6, "truncated normal L1 " + fmt(tn_l1));

  std::vector<GridDensity> tests = {make_uniform(1), make_truncated_normal(0.5, 0.2), make_truncated_normal(0.3, 0.1),
                                    make_truncated_normal(0.7, 0.05, 256),
                                    make_mixture({make_truncated_normal(0.3, 0.1), make_truncated_normal(0.7, 0.1)},
                                                 {0.5, 0.5})};
  double worst_dom = HUGE_VAL;
  for (const auto& p : tests) {
    for (int m = 1; m <= 5; ++m) {
      const double d = maxent_entropy(p, TensorBasis(1, m)) - entropy(p);
      worst_dom = std::min(worst_dom, d);
    }
  }
  o.require(worst_dom >= -1e-8, "entropy dominance " + fmt(worst_dom));

  double worst_kl = 0.0;
  for (int t = 0; t < 50; ++t) {
    const TensorBasis basis(1 + t % 3, 3);
    const ExpFamilyDensity p(basis, uniform_vector(g, basis.size(), 1.5));
    const ExpFamilyDensity q(basis, uniform_vector(g, basis.size(), 1.5));
    worst_kl = std::max(worst_kl, std::abs(kl_expfam_closed_form(p, q) - kl_divergence(p, q)));
  }
  o.require(worst_kl <= 1e-7, "closed-form KL error " + fmt(worst_kl));
  if (o.ok) {
    o.detail = "lambda err " + fmt(worst_lambda) + ", tn L1 " + fmt(tn_l1) + ", min h_phi-h " + fmt(worst_dom) +
               ", KL err " + fmt(worst_kl);
  }
  return o;
}

// 4 ------------------------------------------------------------------------
Outcome worst_case_labeling_equality() {
  Outcome o;
  std::mt19937_64 g(4242);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  double worst_eq = 0.0;
  double worst_excess = -HUGE_VAL;
  for (int t = 0; t < 20; ++t) {
    const auto p = make_product({make_truncated_normal(u(g), 0.1 + 0.3 * u(g), 32), make_truncated_normal(u(g), 0.1 + 0.3 * u(g), 32)});
    const auto q = make_product({make_truncated_normal(u(g), 0.1 + 0.3 * u(g), 32), make_truncated_normal(u(g), 0.1 + 0.3 * u(g), 32)});
    const auto f = t % 4 == 0 ? constant_classifier(t % 8 == 0) : threshold_classifier(t % 2, u(g), t % 3 == 0);
    const auto wc = worst_case_labeling(f, p, q);
    worst_eq = std::max(worst_eq, std::abs(wc.gap - 0.5 * l1_distance(p, q)));
    if (t == 0) {
      for (int i = 0; i < 200; ++i) {
        const double a = u(g), b = u(g), c = u(g);
        const Labeling l{[=](std::span<const double> x) {
                           return std::clamp(0.5 + 0.5 * std::sin(9.0 * a * x[0] + 7.0 * b * x[1] + 5.0 * c), 0.0, 1.0);
                         },
                         "random"};
        worst_excess = std::max(worst_excess, labeling_gap(f, l, p, q) - wc.gap);
      }
    }
  }
  o.require(worst_eq <= 1e-8, "gap vs L1/2 " + fmt(worst_eq));
  o.require(worst_excess <= 1e-8, "random labeling excess " + fmt(worst_excess));
  if (o.ok) o.detail = "max |gap - L1/2| " + fmt(worst_eq) + ", max random excess " + fmt(worst_excess);
  return o;
}

// 5-7 ----------------------------------------------------------------------
Outcome from_record(const ExperimentRecord& r, double secs, double limit) {
  Outcome o;
  for (const auto& c : r.criteria) o.require(c.ok, c.name + " (" + c.detail + ")");
  o.require(secs < limit, "runtime " + fmt(secs) + " s over " + fmt(limit) + " s");
  if (o.ok) {
    for (const auto& c : r.criteria) o.detail += (o.detail.empty() ? "" : "; ") + c.name + (c.detail.empty() ? "" : " " + c.detail);
  }
  return o;
}

// 8 ------------------------------------------------------------------------
Outcome independence() {
  Outcome o;
  std::mt19937_64 g(88);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  const int m = 3;
  const int order = 48;
  const auto grid = QuadGridND::with_order(2, order);
  const TensorBasis basis(2, m);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    const auto p = make_product({make_truncated_normal(u(g), 0.15 + 0.2 * u(g), order), make_truncated_normal(u(g), 0.15 + 0.2 * u(g), order)}, order);
    const auto q = make_product({make_truncated_normal(u(g), 0.15 + 0.2 * u(g), order), make_truncated_normal(u(g), 0.15 + 0.2 * u(g), order)}, order);
    const FitOptions opt{.tol = 1e-12, .order = order};
    const auto jp = fit_maxent_joint(moments(p, basis), grid, opt);
    const auto jq = fit_maxent_joint(moments(q, basis), grid, opt);
    if (jp.status != FitStatus::kConverged || jq.status != FitStatus::kConverged) {
      o.require(false, "joint fit " + std::to_string(t) + " did not converge");
      continue;
    }
    double joint = 0.0;
    grid.for_each_node([&](std::size_t, std::span<const double> x, double w) {
      const double lp = jp.log_density(x);
      joint += w * std::exp(lp) * (lp - jq.log_density(x));
    });
    double separate = 0.0;
    for (int j = 0; j < 2; ++j) {
      const TensorBasis b1(1, m);
      std::vector<double> mp(m), mq(m);
      const auto mup = moments(p, basis);
      const auto muq = moments(q, basis);
      for (int i = 0; i < m; ++i) {
        mp[i] = mup.at(j, i + 1);
        mq[i] = muq.at(j, i + 1);
      }
      const auto fp = fit_maxent(MomentVector(b1, mp), opt);
      const auto fq = fit_maxent(MomentVector(b1, mq), opt);
      if (!fp.ok() || !fq.ok()) {
        o.require(false, "marginal fit " + std::to_string(t) + " did not converge");
        continue;
      }
      separate += kl_divergence(fp.density, fq.density);
    }
    worst = std::max(worst, std::abs(joint - separate));
  }
  o.require(worst <= 1e-6, "joint vs separate " + fmt(worst));
  if (o.ok) o.detail = "max |D_joint - sum D_i| " + fmt(worst);
  return o;
}

// 9 ------------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads for experiments")->check(CLI::Range(1, 1024));
  CLI11_PARSE(app, argc, argv);
  const RunOptions run{.threads = threads};

  try {
    auto t0 = Clock::now();
    auto o1 = reference_constants();
    double s = seconds_since(t0);
    o1.require(s < 1.0, "runtime " + fmt(s) + " s");
    report(1, "reference constants", o1, s);

    t0 = Clock::now();
    const auto o2 = basis_exactness();
    report(2, "basis exactness", o2, seconds_since(t0));

    t0 = Clock::now();
    auto o3 = maxent_correctness();
    s = seconds_since(t0);
    o3.require(s < 30.0, "runtime " + fmt(s) + " s");
    report(3, "maximum-entropy fits", o3, s);

    t0 = Clock::now();
    const auto o4 = worst_case_labeling_equality();
    report(4, "worst-case labeling gap", o4, seconds_since(t0));

    std::vector<ExperimentRecord> records;
    t0 = Clock::now();
    records.push_back(theorem1_empirical_verification({}, 1, run));
    s = seconds_since(t0);
    report(5, "moment L1 bound on random class members", from_record(records.back(), s, 120.0), s);

    t0 = Clock::now();
    records.push_back(truncated_normal_counterexample({}, 0, run));
    s = seconds_since(t0);
    report(6, "truncated-normal counterexample", from_record(records.back(), s, HUGE_VAL), s);

    t0 = Clock::now();
    records.push_back(sample_concentration({}, 3, run));
    s = seconds_since(t0);
    report(7, "sample concentration", from_record(records.back(), s, 300.0), s);

    t0 = Clock::now();
    const auto o8 = independence();
    report(8, "joint vs per-dimension fits", o8, seconds_since(t0));

    t0 = Clock::now();
    Outcome o9;
    records.push_back(section7_repro(0));
    records.push_back(toy_adaptation_demo(toy_scenario("shift"), 5, {}, run));
    records.push_back(levy_relation_probe({}, 0, run));
    const auto base = fs::temp_directory_path() / "momentda-acceptance";
    fs::remove_all(base);
    for (const auto& r : records) write_record(r, base / "a");
    std::vector<ExperimentRecord> again;
    again.push_back(theorem1_empirical_verification({}, 1, run));
    again.push_back(truncated_normal_counterexample({}, 0, run));
    again.push_back(sample_concentration({}, 3, run));
    again.push_back(section7_repro(0));
    again.push_back(toy_adaptation_demo(toy_scenario("shift"), 5, {}, run));
    again.push_back(levy_relation_probe({}, 0, run));
    for (const auto& r : again) write_record(r, base / "b");
    for (const auto& r : records) {
      for (const char* ext : {".csv", ".json"}) {
        const auto f = r.stem() + ext;
        const auto a = slurp(base / "a" / f);
        o9.require(!a.empty() && a == slurp(base / "b" / f), f + " differs");
      }
    }
    fs::remove_all(base);
    if (o9.ok) o9.detail = std::to_string(2 * records.size()) + " files identical";
    report(9, "byte-identical reruns", o9, seconds_since(t0));
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
