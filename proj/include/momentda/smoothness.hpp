#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "momentda/density.hpp"
#include "momentda/error.hpp"
#include "momentda/maxent.hpp"
#include "momentda/polybasis.hpp"
#include "momentda/quadrature.hpp"

namespace momentda {

/// Finite-difference weights for the `deriv`-th derivative at z on the given
/// abscissae (Fornberg's recursion). Row i holds the weight of x[i].
inline std::vector<long double> fd_weights(long double z, const std::vector<long double>& x, int deriv) {
  const int n = static_cast<int>(x.size());
  detail::require(n > deriv, "stencil too small for the derivative order");
  std::vector<std::vector<long double>> c(n, std::vector<long double>(deriv + 1, 0.0L));
  long double c1 = 1.0L;
  long double c4 = x[0] - z;
  c[0][0] = 1.0L;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, deriv);
    long double c2 = 1.0L;
    const long double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const long double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<long double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][deriv];
  return w;
}

inline constexpr int kFdAccuracy = 8;

struct FdOptions {
  int accuracy = kFdAccuracy;
  double h0 = 0.06;
  int levels = 3;
  double rel_tol = 1e-3;
  double abs_tol = 1e-4;
  int quad_order = 64;
};

struct SobolevEstimate {
  double value = 0.0;
  double step = 0.0;
  double self_convergence = 0.0;
  bool converged = false;
  bool exact = false;
};

namespace detail {

/// k-th derivative of f at t with an (k + accuracy)-point stencil of spacing
/// h, shifted inward near the ends so every point lies in [0,1].
inline double fd_derivative(const ScalarFn& f, double t, int k, double h, int accuracy) {
  const int s = k + accuracy;
  int lo = -(s - 1) / 2;
  const int lo_min = static_cast<int>(std::ceil(-t / h - 1e-12));
  const int hi_max = static_cast<int>(std::floor((1.0 - t) / h + 1e-12));
  if (lo < lo_min) lo = lo_min;
  if (lo + s - 1 > hi_max) lo = hi_max - (s - 1);
  if (lo < lo_min) throw InvalidArgument("finite-difference stencil does not fit in [0,1]");
  std::vector<long double> off(s);
  for (int i = 0; i < s; ++i) off[i] = lo + i;
  const auto w = fd_weights(0.0L, off, k);
  long double acc = 0.0L;
  for (int i = 0; i < s; ++i) acc += w[i] * static_cast<long double>(f(t + (lo + i) * h));
  return static_cast<double>(acc / std::pow(static_cast<long double>(h), k));
}

inline double l2_of_derivative(const ScalarFn& f, int k, double h, const FdOptions& opt, const QuadRule1D& rule) {
  double acc = 0.0;
  for (int a = 0; a < rule.order(); ++a) {
    const double d = fd_derivative(f, rule.nodes[a], k, h, opt.accuracy);
    acc += rule.weights[a] * d * d;
  }
  return std::sqrt(acc);
}

}  // namespace detail

/// ||d^k g||_{L2[0,1]} by finite differences. Steps start at the largest one
/// whose stencil fits in [0,1] (capped at h0) and halve opt.levels times; the
/// adjacent pair that agrees best is reported, flagged unconverged when even
/// that pair differs by more than abs_tol * max(1, max|g|) + rel_tol * value.
inline SobolevEstimate sobolev_seminorm_fd(const ScalarFn& g, int k, const FdOptions& opt = {}) {
  detail::require(k >= 1, "derivative order must be >= 1");
  const QuadRule1D rule = gauss_rule(opt.quad_order);
  double scale = 1.0;
  for (double t : rule.nodes) scale = std::max(scale, std::abs(g(t)));
  const int span = k + opt.accuracy - 1;
  double h = std::min(opt.h0, 0.95 / span);
  std::vector<double> hs;
  std::vector<double> vals;
  for (int level = 0; level <= opt.levels; ++level) {
    hs.push_back(h);
    vals.push_back(detail::l2_of_derivative(g, k, h, opt, rule));
    h /= 2;
  }
  SobolevEstimate est;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
    const double diff = std::abs(vals[i + 1] - vals[i]);
    if (diff < best) {
      best = diff;
      est.value = vals[i];
      est.step = hs[i];
      est.self_convergence = diff;
    }
  }
  est.converged = best <= opt.abs_tol * scale + opt.rel_tol * std::abs(est.value);
  return est;
}

/// ||d^k log p_j||_{L2} of one factor of an exponential-family density, exact.
inline SobolevEstimate sobolev_seminorm_exact(const ExpFamilyDensity& p, int j, int k) {
  const auto& b = p.basis().per_dim();
  const auto lam = p.lambda_block(j);
  const QuadRule1D rule = gauss_rule(std::max(2, b.degree() + 1));
  double acc = 0.0;
  for (int a = 0; a < rule.order(); ++a) {
    double d = 0.0;
    for (int n = std::max(k, 1); n <= b.degree(); ++n) d -= lam[n - 1] * b.derivative(n, k, rule.nodes[a]);
    acc += rule.weights[a] * d * d;
  }
  SobolevEstimate est;
  est.value = std::sqrt(acc);
  est.converged = true;
  est.exact = true;
  return est;
}

/// Evaluation points for sup-norm estimates: a uniform grid with 10x as many
/// points as the rule, endpoints included, merged with the rule's nodes.
inline std::vector<double> sup_probe_points(const QuadRule1D& rule) {
  const int n = 10 * rule.order();
  std::vector<double> pts;
  pts.reserve(n + 1 + rule.order());
  for (int i = 0; i <= n; ++i) pts.push_back(static_cast<double>(i) / n);
  pts.insert(pts.end(), rule.nodes.begin(), rule.nodes.end());
  std::sort(pts.begin(), pts.end());
  return pts;
}

struct SmoothnessReport {
  int m = 0;
  double epsilon = 0.0;  ///< NaN when the maximum-entropy fit failed
  std::string epsilon_message;
  double c_inf = 0.0;
  std::vector<SobolevEstimate> c_r;

  double c_r_max() const {
    double v = 0.0;
    for (const auto& e : c_r) v = std::max(v, e.value);
    return v;
  }
  bool epsilon_resolved() const { return !std::isnan(epsilon); }
  bool indeterminate() const {
    return std::any_of(c_r.begin(), c_r.end(), [](const SobolevEstimate& e) { return !e.converged; });
  }
};

inline void to_json(nlohmann::json& j, const SobolevEstimate& e) {
  j = {{"value", e.value}, {"step", e.step}, {"self_convergence", e.self_convergence},
       {"converged", e.converged}, {"exact", e.exact}};
}

inline void to_json(nlohmann::json& j, const SmoothnessReport& r) {
  j = {{"m", r.m}, {"epsilon", r.epsilon_resolved() ? nlohmann::json(r.epsilon) : nlohmann::json(nullptr)},
       {"c_inf", r.c_inf}, {"c_r", r.c_r}, {"c_r_max", r.c_r_max()}, {"indeterminate", r.indeterminate()}};
  if (!r.epsilon_message.empty()) j["epsilon_message"] = r.epsilon_message;
}

namespace detail {

/// sup |sum_j g_j| over the cube when g_j are the log factors: the extremes
/// are attained coordinatewise.
inline double sup_abs_of_sum(const std::vector<std::pair<double, double>>& ranges) {
  double lo = 0.0;
  double hi = 0.0;
  for (const auto& [a, b] : ranges) {
    lo += a;
    hi += b;
  }
  return std::max(std::abs(lo), std::abs(hi));
}

inline std::pair<double, double> range_on(const ScalarFn& g, const std::vector<double>& pts) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double t : pts) {
    const double v = g(t);
    if (!std::isfinite(v)) throw NumericalError("log-density not finite at " + std::to_string(t));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

template <typename Density>
inline void fill_epsilon(SmoothnessReport& r, const Density& p, const TensorBasis& basis, const FitOptions& fit) {
  try {
    r.epsilon = epsilon_gap(p, basis, fit);
  } catch (const NumericalError& e) {
    r.epsilon = std::numeric_limits<double>::quiet_NaN();
    r.epsilon_message = e.what();
  }
}

}  // namespace detail

/// Entropy gap, sup-norm of log p and per-dimension L2 norms of the m-th
/// derivative of the marginal log-densities.
inline SmoothnessReport smoothness_report(const ExpFamilyDensity& p, int m, const TensorBasis& basis,
                                          const FitOptions& fit = {}) {
  detail::require(m >= 1, "smoothness order must be >= 1");
  SmoothnessReport r;
  r.m = m;
  detail::fill_epsilon(r, p, basis, fit);
  const auto pts = sup_probe_points(p.rule());
  std::vector<std::pair<double, double>> ranges;
  for (int j = 0; j < p.dim(); ++j) {
    ranges.push_back(detail::range_on([&p, j](double t) { return p.log_factor(j, t); }, pts));
    r.c_r.push_back(sobolev_seminorm_exact(p, j, m));
  }
  r.c_inf = detail::sup_abs_of_sum(ranges);
  return r;
}

inline SmoothnessReport smoothness_report(const GridDensity& p, int m, const TensorBasis& basis,
                                          const FitOptions& fit = {}, const FdOptions& fd = {}) {
  detail::require(m >= 1, "smoothness order must be >= 1");
  if (!p.has_evaluator()) throw InvalidArgument("smoothness report needs a density with an evaluator");
  SmoothnessReport r;
  r.m = m;
  detail::fill_epsilon(r, p, basis, fit);
  auto log_marginal = [&p](int j) -> ScalarFn {
    return [&p, j](double t) {
      const double v = p.log_marginal(j, t);
      if (!std::isfinite(v)) throw NumericalError("marginal density not positive at " + std::to_string(t));
      return v;
    };
  };
  if (p.is_product()) {
    std::vector<std::pair<double, double>> ranges;
    for (int j = 0; j < p.dim(); ++j) ranges.push_back(detail::range_on(log_marginal(j), sup_probe_points(p.grid().rule(j))));
    r.c_inf = detail::sup_abs_of_sum(ranges);
  } else {
    std::vector<std::vector<double>> pts;
    std::size_t total = 1;
    for (int j = 0; j < p.dim(); ++j) {
      pts.push_back(sup_probe_points(p.grid().rule(j)));
      total *= pts.back().size();
    }
    if (total > 4'000'000) throw InvalidArgument("sup-norm probe grid too large for a non-product density");
    std::vector<double> x(p.dim());
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rem = idx;
      for (int j = p.dim() - 1; j >= 0; --j) {
        x[j] = pts[j][rem % pts[j].size()];
        rem /= pts[j].size();
      }
      const double v = p(x);
      if (!(v > 0.0)) throw NumericalError("density not positive at " + detail::format_point(x));
      r.c_inf = std::max(r.c_inf, std::abs(std::log(v)));
    }
  }
  for (int j = 0; j < p.dim(); ++j) r.c_r.push_back(sobolev_seminorm_fd(log_marginal(j), m, fd));
  return r;
}

}  // namespace momentda
