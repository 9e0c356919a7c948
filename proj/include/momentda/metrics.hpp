#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "momentda/density.hpp"
#include "momentda/error.hpp"
#include "momentda/moment_vector.hpp"
#include "momentda/quadrature.hpp"

namespace momentda {

namespace detail {

/// q tabulated on p's grid.
inline GridDensity aligned(const GridDensity& p, const GridDensity& q) {
  if (p.dim() != q.dim()) {
    throw InvalidArgument("density dimensions differ: " + std::to_string(p.dim()) + " vs " + std::to_string(q.dim()));
  }
  return q.retabulate(p.grid());
}

inline GridDensity grid_of(const ExpFamilyDensity& p) { return p.to_grid(QuadGridND(p.dim(), p.rule())); }

}  // namespace detail

// ---------------------------------------------------------------------------
// L1 and KL.

/// int |p - q| on p's grid; q is re-tabulated there when the grids differ.
inline double l1_distance(const GridDensity& p, const GridDensity& q) {
  const GridDensity qa = detail::aligned(p, q);
  double acc = 0.0;
  for (std::size_t i = 0; i < p.grid().size(); ++i) acc += p.grid().weight(i) * std::abs(p.value(i) - qa.value(i));
  return acc;
}

inline double l1_distance(const ExpFamilyDensity& p, const ExpFamilyDensity& q) {
  return l1_distance(detail::grid_of(p), detail::grid_of(q));
}

/// int p log(p/q) on p's grid.
inline double kl_divergence(const GridDensity& p, const GridDensity& q) {
  const GridDensity qa = detail::aligned(p, q);
  double acc = 0.0;
  p.grid().for_each_node([&](std::size_t i, std::span<const double> x, double w) {
    const double pv = p.value(i);
    if (pv == 0.0 || w == 0.0) return;
    const double qv = qa.value(i);
    if (!(qv > 0.0)) throw NumericalError("KL support violation: q = 0 where p > 0 at node " + detail::format_point(x));
    acc += w * pv * std::log(pv / qv);
  });
  return acc;
}

inline double kl_divergence(const ExpFamilyDensity& p, const ExpFamilyDensity& q) {
  return kl_divergence(detail::grid_of(p), detail::grid_of(q));
}

/// D(p||q) = sum_j (log c_pj - log c_qj) + <mu_p, lambda_q - lambda_p>.
inline double kl_expfam_closed_form(const ExpFamilyDensity& p, const ExpFamilyDensity& q) {
  if (!p.basis().same_as(q.basis())) throw InvalidArgument("kl_expfam_closed_form: basis mismatch");
  const auto mu = moments(p);
  double d = 0.0;
  for (int j = 0; j < p.dim(); ++j) d += p.log_norm()[j] - q.log_norm()[j];
  for (std::size_t i = 0; i < mu.size(); ++i) d += mu[i] * (q.lambda()[i] - p.lambda()[i]);
  return d;
}

// ---------------------------------------------------------------------------
// Moment distances.

inline double moment_l1(const MomentVector& a, const MomentVector& b) {
  if (!a.basis().same_as(b.basis())) throw InvalidArgument("moment_l1: basis mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double moment_l2(const MomentVector& a, const MomentVector& b) {
  if (!a.basis().same_as(b.basis())) throw InvalidArgument("moment_l2: basis mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Empirical mean c_1 and central moments c_2..c_m, each a length-N vector,
/// using the plain 1/k normalization.
inline std::vector<std::vector<double>> central_moments(const Sample& x, int m) {
  if (x.size() == 0) throw InvalidArgument("central moments of an empty sample");
  detail::require(m >= 1, "central moment order must be >= 1");
  const double inv = 1.0 / static_cast<double>(x.size());
  std::vector<std::vector<double>> c(m, std::vector<double>(x.dim, 0.0));
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (int j = 0; j < x.dim; ++j) c[0][j] += x.row(r)[j];
  }
  for (double& v : c[0]) v *= inv;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const auto pt = x.row(r);
    for (int j = 0; j < x.dim; ++j) {
      const double d = pt[j] - c[0][j];
      double pw = d;
      for (int o = 2; o <= m; ++o) {
        pw *= d;
        c[o - 1][j] += pw;
      }
    }
  }
  for (int o = 2; o <= m; ++o) {
    for (double& v : c[o - 1]) v *= inv;
  }
  return c;
}

/// Central Moment Discrepancy: sum_{j=1..m} ||c_j(X) - c_j(Y)||_2.
inline double cmd(const Sample& x, const Sample& y, int m) {
  if (x.size() == 0 || y.size() == 0) throw InvalidArgument("cmd of an empty sample");
  if (x.dim != y.dim) throw InvalidArgument("cmd: sample dimensions differ");
  const auto cx = central_moments(x, m);
  const auto cy = central_moments(y, m);
  double total = 0.0;
  for (int o = 0; o < m; ++o) {
    double s = 0.0;
    for (int j = 0; j < x.dim; ++j) s += (cx[o][j] - cy[o][j]) * (cx[o][j] - cy[o][j]);
    total += std::sqrt(s);
  }
  return total;
}

/// Population counterpart of central_moments, by quadrature on p's grid.
inline std::vector<std::vector<double>> central_moments(const GridDensity& p, int m) {
  detail::require(m >= 1, "central moment order must be >= 1");
  const int n = p.dim();
  std::vector<std::vector<double>> c(m, std::vector<double>(n, 0.0));
  p.grid().for_each_node([&](std::size_t i, std::span<const double> x, double w) {
    for (int j = 0; j < n; ++j) c[0][j] += w * p.value(i) * x[j];
  });
  p.grid().for_each_node([&](std::size_t i, std::span<const double> x, double w) {
    const double pw0 = w * p.value(i);
    for (int j = 0; j < n; ++j) {
      const double d = x[j] - c[0][j];
      double pw = d;
      for (int o = 2; o <= m; ++o) {
        pw *= d;
        c[o - 1][j] += pw0 * pw;
      }
    }
  });
  return c;
}

inline double cmd(const GridDensity& p, const GridDensity& q, int m) {
  if (p.dim() != q.dim()) throw InvalidArgument("cmd: density dimensions differ");
  const auto cp = central_moments(p, m);
  const auto cq = central_moments(q, m);
  double total = 0.0;
  for (int o = 0; o < m; ++o) {
    double s = 0.0;
    for (int j = 0; j < p.dim(); ++j) s += (cp[o][j] - cq[o][j]) * (cp[o][j] - cq[o][j]);
    total += std::sqrt(s);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Levy metric.

struct LevyOptions {
  int grid_points = 10000;
  double tol = 1e-6;
};

namespace detail {
inline bool levy_corridor_holds(const TabulatedCdf& p, const TabulatedCdf& q, double eps, int points) {
  for (int i = 0; i <= points; ++i) {
    const double x = static_cast<double>(i) / points;
    const double qx = q(x);
    if (p(x - eps) - eps > qx) return false;
    if (qx > p(x + eps) + eps) return false;
  }
  return true;
}
}  // namespace detail

/// Smallest eps with P(x-eps) - eps <= Q(x) <= P(x+eps) + eps on a uniform
/// grid of [0,1], found by bisection. Result lies in [0,1].
inline double levy_metric(const TabulatedCdf& p, const TabulatedCdf& q, const LevyOptions& opt = {}) {
  if (detail::levy_corridor_holds(p, q, 0.0, opt.grid_points)) return 0.0;
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > opt.tol) {
    const double mid = 0.5 * (lo + hi);
    if (detail::levy_corridor_holds(p, q, mid, opt.grid_points)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

inline TabulatedCdf cdf_of(const GridDensity& p, int cells = 4096) {
  detail::require(p.dim() == 1 && p.has_evaluator(), "CDF needs a 1-D density with an evaluator");
  return TabulatedCdf::from_density([&p](double t) { return p(t); }, cells);
}

// ---------------------------------------------------------------------------
// Classifiers, labelings and risks.

struct Classifier {
  std::function<int(std::span<const double>)> fn;
  std::string description;
  nlohmann::json params;

  int operator()(std::span<const double> x) const { return fn(x) != 0 ? 1 : 0; }
};

struct Labeling {
  std::function<double(std::span<const double>)> fn;
  std::string description;

  double operator()(std::span<const double> x) const { return std::clamp(fn(x), 0.0, 1.0); }
};

inline Classifier constant_classifier(int value) {
  return {[value](std::span<const double>) { return value; }, "constant " + std::to_string(value),
          {{"type", "constant"}, {"value", value}}};
}

/// 1 when x[axis] > threshold (or <= threshold when flipped).
inline Classifier threshold_classifier(int axis, double threshold, bool flip = false) {
  return {[=](std::span<const double> x) { return (x[axis] > threshold) != flip ? 1 : 0; },
          "x" + std::to_string(axis) + (flip ? " <= " : " > ") + std::to_string(threshold),
          {{"type", "threshold"}, {"axis", axis}, {"threshold", threshold}, {"flip", flip}}};
}

inline Labeling labeling_from(const Classifier& f) {
  return {[f](std::span<const double> x) { return static_cast<double>(f(x)); }, f.description};
}

namespace detail {
inline double risk_on_grid(const Classifier& f, const Labeling& l, const GridDensity& p) {
  double acc = 0.0;
  p.grid().for_each_node([&](std::size_t i, std::span<const double> x, double w) {
    acc += w * std::abs(f(x) - l(x)) * p.value(i);
  });
  return acc;
}
}  // namespace detail

/// E_p |f - l|. The indicator integrand is integrated at twice the density's
/// Gauss order (capped at 512) when the density has an evaluator.
inline double risk(const Classifier& f, const Labeling& l, const GridDensity& p) {
  if (!p.has_evaluator()) return detail::risk_on_grid(f, l, p);
  std::vector<QuadRule1D> rules;
  for (int j = 0; j < p.dim(); ++j) rules.push_back(gauss_rule(std::min(2 * p.grid().rule(j).order(), kMaxGaussOrder)));
  return detail::risk_on_grid(f, l, p.retabulate(QuadGridND(std::move(rules))));
}

/// (1/k) sum |f(x) - l(x)|.
inline double empirical_risk(const Classifier& f, const Labeling& l, const Sample& x) {
  if (x.size() == 0) throw InvalidArgument("empirical risk of an empty sample");
  double acc = 0.0;
  for (std::size_t r = 0; r < x.size(); ++r) acc += std::abs(f(x.row(r)) - l(x.row(r)));
  return acc / static_cast<double>(x.size());
}

/// |E_q|f-l| - E_p|f-l|| on p's grid.
inline double labeling_gap(const Classifier& f, const Labeling& l, const GridDensity& p, const GridDensity& q) {
  const GridDensity qa = detail::aligned(p, q);
  double acc = 0.0;
  p.grid().for_each_node([&](std::size_t i, std::span<const double> x, double w) {
    acc += w * std::abs(f(x) - l(x)) * (qa.value(i) - p.value(i));
  });
  return std::abs(acc);
}

struct WorstCaseLabeling {
  Labeling labeling;
  double gap = 0.0;
};

/// l* = |f - 1_A| with A = {p >= q}, so |f - l*| = 1_A and the risk gap is
/// the largest any labeling can produce, namely half the L1 distance.
inline WorstCaseLabeling worst_case_labeling(const Classifier& f, const GridDensity& p, const GridDensity& q) {
  if (p.dim() != q.dim()) throw InvalidArgument("worst_case_labeling: dimension mismatch");
  if (!p.has_evaluator() || !q.has_evaluator()) {
    throw InvalidArgument("worst_case_labeling needs densities with evaluators");
  }
  auto pp = std::make_shared<GridDensity>(p);
  auto qq = std::make_shared<GridDensity>(q);
  Labeling l{[f, pp, qq](std::span<const double> x) {
               const int in_a = (*pp)(x) >= (*qq)(x) ? 1 : 0;
               return static_cast<double>(std::abs(f(x) - in_a));
             },
             "worst case for " + f.description};
  const double gap = labeling_gap(f, l, p, q);
  return {std::move(l), gap};
}

}  // namespace momentda
