#pragma once

// Densities on [0,1]^N and their basic functionals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "momentda/error.hpp"
#include "momentda/moment_vector.hpp"
#include "momentda/polybasis.hpp"
#include "momentda/quadrature.hpp"
#include "momentda/random.hpp"

namespace momentda {

using PointFn = std::function<double(std::span<const double>)>;
using ScalarFn = std::function<double(double)>;

inline constexpr double kNormalizationTol = 1e-9;

/// A density tabulated on a tensor quadrature grid. Values are normalized so
/// the grid integrates them to 1. An evaluator, when present, is normalized
/// consistently and allows re-tabulation, sampling and derivative probes.
/// Product-form densities additionally carry their 1-D marginal factors.
class GridDensity {
 public:
  GridDensity() = default;

  /// Tabulates `eval` on `grid` and rescales it to unit mass.
  static GridDensity tabulate(QuadGridND grid, PointFn eval, std::vector<ScalarFn> factors = {},
                              nlohmann::json spec = nullptr) {
    GridDensity d;
    d.grid_ = std::move(grid);
    d.values_.resize(d.grid_.size());
    double mass = 0.0;
    d.grid_.for_each_node([&](std::size_t idx, std::span<const double> x, double w) {
      const double v = eval(x);
      if (!std::isfinite(v) || v < 0.0) {
        throw NumericalError("density value " + std::to_string(v) + " at node " + detail::format_point(x));
      }
      d.values_[idx] = v;
      mass += w * v;
    });
    if (!(mass > 0.0)) throw NumericalError("density has zero mass on its grid");
    for (double& v : d.values_) v /= mass;
    const double inv = 1.0 / mass;
    d.eval_ = [eval = std::move(eval), inv](std::span<const double> x) { return eval(x) * inv; };
    if (!factors.empty()) {
      if (static_cast<int>(factors.size()) != d.grid_.dim()) {
        throw InvalidArgument("factor count does not match density dimension");
      }
      // Normalize each factor on its own 1-D rule so that marginals integrate to 1.
      for (int j = 0; j < d.grid_.dim(); ++j) {
        const double fm = integrate_1d(factors[j], d.grid_.rule(j));
        d.factor_log_mass_.push_back(std::log(fm));
        factors[j] = [f = std::move(factors[j]), fm](double t) { return f(t) / fm; };
      }
      d.factors_ = std::move(factors);
    }
    d.spec_ = std::move(spec);
    return d;
  }

  /// A purely tabulated density (no evaluator).
  static GridDensity from_values(QuadGridND grid, std::vector<double> values) {
    if (values.size() != grid.size()) throw InvalidArgument("value count does not match grid size");
    GridDensity d;
    d.grid_ = std::move(grid);
    double mass = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i]) || values[i] < 0.0) throw InvalidArgument("density values must be finite and >= 0");
      mass += d.grid_.weight(i) * values[i];
    }
    if (!(mass > 0.0)) throw InvalidArgument("density has zero mass");
    for (double& v : values) v /= mass;
    d.values_ = std::move(values);
    return d;
  }

  int dim() const { return grid_.dim(); }
  const QuadGridND& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double value(std::size_t idx) const { return values_[idx]; }

  bool has_evaluator() const { return static_cast<bool>(eval_); }
  double operator()(std::span<const double> x) const {
    if (!eval_) throw InvalidArgument("density has no evaluator (tabulated values only)");
    return eval_(x);
  }
  double operator()(double x) const { return (*this)(std::span<const double>(&x, 1)); }

  bool is_product() const { return !factors_.empty() || dim() == 1; }

  /// Marginal density of dimension j at t. Product densities use their
  /// factors; otherwise the other coordinates are integrated on the grid.
  double marginal(int j, double t) const {
    if (!factors_.empty()) return factors_[j](t);
    if (dim() == 1) return (*this)(t);
    if (!eval_) throw InvalidArgument("marginal evaluation needs an evaluator");
    double acc = 0.0;
    std::vector<double> x(dim());
    for (std::size_t idx = 0; idx < grid_.size(); ++idx) {
      if (grid_.coord_index(idx, j) != 0) continue;
      grid_.node(idx, x);
      x[j] = t;
      double w = 1.0;
      for (int d = 0; d < dim(); ++d) {
        if (d != j) w *= grid_.rule(d).weights[grid_.coord_index(idx, d)];
      }
      acc += w * eval_(x);
    }
    return acc;
  }

  /// Attaches closed-form logs of the unnormalized factors passed to
  /// tabulate(), so log_marginal stays finite where the factor underflows.
  GridDensity& set_log_factors(std::vector<ScalarFn> log_factors) {
    if (log_factors.size() != factors_.size()) throw InvalidArgument("log factor count does not match factor count");
    for (std::size_t j = 0; j < log_factors.size(); ++j) {
      log_factors[j] = [f = std::move(log_factors[j]), c = factor_log_mass_[j]](double t) { return f(t) - c; };
    }
    log_factors_ = std::move(log_factors);
    return *this;
  }

  double log_marginal(int j, double t) const {
    if (!log_factors_.empty()) return log_factors_[j](t);
    return std::log(marginal(j, t));
  }

  /// Marginal density of dimension j at the nodes of grid().rule(j).
  std::vector<double> marginal_values(int j) const {
    const auto& rule = grid_.rule(j);
    std::vector<double> out(rule.order(), 0.0);
    for (std::size_t idx = 0; idx < grid_.size(); ++idx) {
      const std::size_t a = grid_.coord_index(idx, j);
      out[a] += grid_.weight(idx) / rule.weights[a] * values_[idx];
    }
    return out;
  }

  /// Same density tabulated on another grid (needs an evaluator).
  GridDensity retabulate(const QuadGridND& grid) const {
    if (grid_.same_as(grid)) return *this;
    if (!eval_) throw InvalidArgument("cannot re-tabulate a density without an evaluator");
    std::vector<ScalarFn> f = factors_;
    auto d = tabulate(grid, eval_, std::move(f), spec_);
    if (!log_factors_.empty()) d.set_log_factors(log_factors_);
    return d;
  }

  const nlohmann::json& spec() const { return spec_; }

 private:
  QuadGridND grid_;
  std::vector<double> values_;
  PointFn eval_;
  std::vector<ScalarFn> factors_;
  std::vector<double> factor_log_mass_;
  std::vector<ScalarFn> log_factors_;
  nlohmann::json spec_;
};

/// Product exponential-family density
///   p(x) = prod_j c_j exp(-<lambda_j, phi(x_j)>)
/// with lambda stored dimension-major. The sign follows exp(-<lambda, phi>),
/// so lambda is the negated natural parameter.
class ExpFamilyDensity {
 public:
  ExpFamilyDensity() = default;

  ExpFamilyDensity(TensorBasis basis, std::vector<double> lambda, QuadRule1D rule = gauss_rule(128))
      : basis_(std::move(basis)), lambda_(std::move(lambda)), rule_(std::move(rule)) {
    if (lambda_.size() != basis_.size()) {
      throw InvalidArgument("lambda length " + std::to_string(lambda_.size()) + " != m*N = " +
                            std::to_string(basis_.size()));
    }
    const int m = basis_.degree();
    features_.assign(static_cast<std::size_t>(rule_.order()) * m, 0.0);
    for (int a = 0; a < rule_.order(); ++a) {
      basis_.per_dim().eval_into(rule_.nodes[a], std::span<double>(features_).subspan(a * m, m));
    }
    log_norm_.assign(basis_.dim(), 0.0);
    for (int j = 0; j < basis_.dim(); ++j) {
      // log c_j = -log int exp(-<lambda_j, phi>), via log-sum-exp over the nodes.
      std::vector<double> expo(rule_.order());
      double mx = -HUGE_VAL;
      for (int a = 0; a < rule_.order(); ++a) {
        expo[a] = -dot(j, node_features(a));
        mx = std::max(mx, expo[a]);
      }
      double s = 0.0;
      for (int a = 0; a < rule_.order(); ++a) s += rule_.weights[a] * std::exp(expo[a] - mx);
      log_norm_[j] = -(mx + std::log(s));
      if (!std::isfinite(log_norm_[j])) throw NumericalError("exp-family normalizer is not finite");
    }
  }

  int dim() const { return basis_.dim(); }
  const TensorBasis& basis() const { return basis_; }
  const std::vector<double>& lambda() const { return lambda_; }
  std::span<const double> lambda_block(int j) const {
    return std::span<const double>(lambda_).subspan(static_cast<std::size_t>(j) * basis_.degree(), basis_.degree());
  }
  /// log c_j for each dimension.
  const std::vector<double>& log_norm() const { return log_norm_; }
  const QuadRule1D& rule() const { return rule_; }

  /// log of the 1-D factor j at t.
  double log_factor(int j, double t) const {
    std::array<double, kMaxBasisDegree> buf;
    const std::span<double> phi(buf.data(), basis_.degree());
    basis_.per_dim().eval_into(t, phi);
    return log_norm_[j] - dot(j, phi);
  }
  double factor(int j, double t) const { return std::exp(log_factor(j, t)); }

  double log_density(std::span<const double> x) const {
    double acc = 0.0;
    for (int j = 0; j < dim(); ++j) acc += log_factor(j, x[j]);
    return acc;
  }
  double operator()(std::span<const double> x) const { return std::exp(log_density(x)); }

  /// Factor j at the nodes of rule().
  std::vector<double> factor_at_nodes(int j) const {
    std::vector<double> out(rule_.order());
    for (int a = 0; a < rule_.order(); ++a) out[a] = std::exp(log_norm_[j] - dot(j, node_features(a)));
    return out;
  }

  /// eta_1..eta_m at node a of rule().
  std::span<const double> node_features(int a) const {
    const int m = basis_.degree();
    return std::span<const double>(features_).subspan(static_cast<std::size_t>(a) * m, m);
  }

  GridDensity to_grid(const QuadGridND& grid) const {
    std::vector<ScalarFn> factors;
    for (int j = 0; j < dim(); ++j) factors.push_back([self = *this, j](double t) { return self.factor(j, t); });
    auto self = std::make_shared<ExpFamilyDensity>(*this);
    return GridDensity::tabulate(grid, [self](std::span<const double> x) { return (*self)(x); },
                                 std::move(factors), to_spec());
  }
  GridDensity to_grid() const { return to_grid(QuadGridND::default_for(dim())); }

  nlohmann::json to_spec() const {
    return {{"type", "expfam"}, {"dim", dim()}, {"m", basis_.degree()}, {"lambda", lambda_}};
  }

 private:
  double dot(int j, std::span<const double> phi) const {
    const auto lam = lambda_block(j);
    double s = 0.0;
    for (std::size_t i = 0; i < lam.size(); ++i) s += lam[i] * phi[i];
    return s;
  }

  TensorBasis basis_;
  std::vector<double> lambda_;
  QuadRule1D rule_;
  std::vector<double> features_;  // rule_.order() x m
  std::vector<double> log_norm_;
};

inline void to_json(nlohmann::json& j, const ExpFamilyDensity& d) { j = d.to_spec(); }

inline void to_json(nlohmann::json& j, const GridDensity& d) {
  j = {{"type", d.spec().is_null() ? nlohmann::json("grid") : d.spec().value("type", nlohmann::json("grid"))},
       {"dim", d.dim()},
       {"order", d.grid().rule(0).order()},
       {"values", d.values()}};
  if (!d.spec().is_null()) j["params"] = d.spec();
}

// ---------------------------------------------------------------------------
// Constructors for the densities used throughout.

inline GridDensity make_uniform(int dim, int order = 0) {
  const auto grid = QuadGridND::with_order(dim, order > 0 ? order : default_order(dim));
  std::vector<ScalarFn> factors(dim, [](double) { return 1.0; });
  return GridDensity::tabulate(grid, [](std::span<const double>) { return 1.0; }, std::move(factors),
                               {{"type", "uniform"}, {"N", dim}});
}

/// Normal(mean, sigma) restricted to [0,1], normalized by quadrature. Throws
/// ResolutionError when the grid mass disagrees with the erf closed form by
/// more than 1e-9 (relative); the caller must raise `order`.
inline GridDensity make_truncated_normal(double mean, double sigma, int order = 128) {
  if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mean)) {
    throw InvalidArgument("truncated normal needs finite mean and sigma > 0");
  }
  const auto rule = gauss_rule(order);
  auto kernel = [mean, sigma](double x) {
    const double z = (x - mean) / sigma;
    return std::exp(-0.5 * z * z);
  };
  const double s2 = sigma * std::numbers::sqrt2;
  const double closed =
      sigma * std::sqrt(std::numbers::pi / 2.0) * (std::erf((1.0 - mean) / s2) - std::erf(-mean / s2));
  const double quad = integrate_1d(kernel, rule);
  if (!(closed > 0.0) || std::abs(quad / closed - 1.0) > kNormalizationTol) {
    throw ResolutionError("Gauss order " + std::to_string(order) + " cannot resolve truncated normal (mean " +
                          std::to_string(mean) + ", sigma " + std::to_string(sigma) + "): mass error " +
                          std::to_string(std::abs(quad / closed - 1.0)));
  }
  auto d = GridDensity::tabulate(QuadGridND(1, rule), [kernel](std::span<const double> x) { return kernel(x[0]); },
                                 {kernel}, {{"type", "truncnorm"}, {"mean", mean}, {"sigma", sigma}});
  d.set_log_factors({[mean, sigma](double x) {
    const double z = (x - mean) / sigma;
    return -0.5 * z * z;
  }});
  return d;
}

/// Convex combination of 1-D densities with evaluators.
inline GridDensity make_mixture(const std::vector<GridDensity>& components, const std::vector<double>& weights,
                                int order = 128) {
  detail::require(!components.empty() && components.size() == weights.size(), "mixture needs matching weights");
  double wsum = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) {
    detail::require(components[i].dim() == 1 && components[i].has_evaluator(),
                    "mixture components must be 1-D densities with evaluators");
    detail::require(weights[i] >= 0.0, "mixture weights must be >= 0");
    wsum += weights[i];
  }
  auto parts = std::make_shared<std::vector<GridDensity>>(components);
  auto w = std::make_shared<std::vector<double>>(weights);
  for (double& v : *w) v /= wsum;
  auto f = [parts, w](double x) {
    double s = 0.0;
    for (std::size_t i = 0; i < parts->size(); ++i) s += (*w)[i] * (*parts)[i](x);
    return s;
  };
  nlohmann::json spec = {{"type", "mixture"}, {"weights", *w}};
  for (const auto& c : components) spec["components"].push_back(c.spec());
  return GridDensity::tabulate(QuadGridND::with_order(1, order), [f](std::span<const double> x) { return f(x[0]); },
                               {f}, spec);
}

/// Independent product of 1-D marginals, tabulated on a tensor grid.
inline GridDensity make_product(const std::vector<GridDensity>& marginals, int order = 0) {
  detail::require(!marginals.empty(), "product needs at least one marginal");
  std::vector<ScalarFn> factors;
  std::vector<ScalarFn> logs;
  nlohmann::json spec = {{"type", "product"}};
  for (const auto& mg : marginals) {
    detail::require(mg.dim() == 1 && mg.has_evaluator(), "product marginals must be 1-D with evaluators");
    factors.push_back([mg](double t) { return mg(t); });
    logs.push_back([mg](double t) { return mg.log_marginal(0, t); });
    spec["marginals"].push_back(mg.spec());
  }
  const int dim = static_cast<int>(marginals.size());
  auto fs = std::make_shared<std::vector<ScalarFn>>(factors);
  auto eval = [fs](std::span<const double> x) {
    double v = 1.0;
    for (std::size_t j = 0; j < fs->size(); ++j) v *= (*fs)[j](x[j]);
    return v;
  };
  auto d = GridDensity::tabulate(QuadGridND::with_order(dim, order > 0 ? order : default_order(dim)), eval,
                                 std::move(factors), spec);
  d.set_log_factors(std::move(logs));
  return d;
}

// ---------------------------------------------------------------------------
// Moments.

inline MomentVector moments(const GridDensity& p, const TensorBasis& basis) {
  if (p.dim() != basis.dim()) {
    throw InvalidArgument("density dimension " + std::to_string(p.dim()) + " != basis dimension " +
                          std::to_string(basis.dim()));
  }
  const int m = basis.degree();
  std::vector<double> out(basis.size(), 0.0);
  std::vector<double> phi(m);
  for (int j = 0; j < p.dim(); ++j) {
    const auto& rule = p.grid().rule(j);
    const auto marg = p.marginal_values(j);
    for (int a = 0; a < rule.order(); ++a) {
      basis.per_dim().eval_into(rule.nodes[a], phi);
      const double wm = rule.weights[a] * marg[a];
      for (int i = 0; i < m; ++i) out[basis.index(j, i + 1)] += wm * phi[i];
    }
  }
  return MomentVector(basis, std::move(out));
}

/// Moments of an exponential-family density in its own basis.
inline MomentVector moments(const ExpFamilyDensity& p) {
  const auto& basis = p.basis();
  const int m = basis.degree();
  const auto& rule = p.rule();
  std::vector<double> out(basis.size(), 0.0);
  for (int j = 0; j < p.dim(); ++j) {
    const auto f = p.factor_at_nodes(j);
    for (int a = 0; a < rule.order(); ++a) {
      const auto phi = p.node_features(a);
      const double wf = rule.weights[a] * f[a];
      for (int i = 0; i < m; ++i) out[basis.index(j, i + 1)] += wf * phi[i];
    }
  }
  return MomentVector(basis, std::move(out));
}

inline MomentVector moments(const ExpFamilyDensity& p, const TensorBasis& basis) {
  if (basis.same_as(p.basis())) return moments(p);
  return moments(p.to_grid(), basis);
}

// ---------------------------------------------------------------------------
// Samples.

/// k points in [0,1]^N, row-major.
struct Sample {
  int dim = 0;
  std::vector<double> data;
  std::uint64_t seed = 0;

  std::size_t size() const { return dim > 0 ? data.size() / dim : 0; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * dim, dim);
  }
  /// Coordinate j of every point.
  std::vector<double> column(int j) const {
    std::vector<double> c(size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = data[i * dim + j];
    return c;
  }
};

inline Sample make_sample(int dim, std::vector<double> data) {
  detail::require(dim >= 1 && data.size() % dim == 0, "sample data length must be a multiple of the dimension");
  for (double v : data) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("sample entries must lie in [0,1]");
  }
  return Sample{dim, std::move(data), 0};
}

inline MomentVector sample_moments(const Sample& x, const TensorBasis& basis) {
  if (x.size() == 0) throw InvalidArgument("sample_moments of an empty sample");
  if (x.dim != basis.dim()) throw InvalidArgument("sample dimension does not match basis dimension");
  const int m = basis.degree();
  std::vector<double> acc(basis.size(), 0.0);
  std::vector<double> phi(m);
  for (std::size_t r = 0; r < x.size(); ++r) {
    const auto pt = x.row(r);
    for (int j = 0; j < x.dim; ++j) {
      basis.per_dim().eval_into(pt[j], phi);
      for (int i = 0; i < m; ++i) acc[basis.index(j, i + 1)] += phi[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(x.size());
  for (double& v : acc) v *= inv;
  return MomentVector(basis, std::move(acc));
}

inline void write_csv(std::ostream& os, const Sample& x) {
  os.precision(17);
  for (std::size_t r = 0; r < x.size(); ++r) {
    const auto pt = x.row(r);
    for (int j = 0; j < x.dim; ++j) os << (j ? "," : "") << pt[j];
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Entropy.

namespace detail {
inline double plogp(double p, std::span<const double> x) {
  if (p == 0.0) return 0.0;
  const double l = std::log(p);
  if (!std::isfinite(l) || p < 0.0) throw NumericalError("log-density not finite at node " + format_point(x));
  return p * l;
}
}  // namespace detail

/// -int p log p on the density's grid, with 0 log 0 = 0.
inline double entropy(const GridDensity& p) {
  double acc = 0.0;
  p.grid().for_each_node([&](std::size_t idx, std::span<const double> x, double w) {
    if (w == 0.0) return;
    acc += w * detail::plogp(p.value(idx), x);
  });
  return -acc;
}

/// Sum of the factor entropies, h_j = -log c_j + <lambda_j, mu_j>.
inline double entropy(const ExpFamilyDensity& p) {
  const auto mu = moments(p);
  double h = 0.0;
  for (int j = 0; j < p.dim(); ++j) {
    const auto lam = p.lambda_block(j);
    const auto mj = mu.block(j);
    double s = 0.0;
    for (std::size_t i = 0; i < lam.size(); ++i) s += lam[i] * mj[i];
    h += -p.log_norm()[j] + s;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Tabulated 1-D CDFs, used for inverse-CDF sampling and the Levy metric.

class TabulatedCdf {
 public:
  TabulatedCdf() = default;
  /// x strictly increasing from 0 to 1, F nondecreasing with F.front() = 0, F.back() = 1.
  TabulatedCdf(std::vector<double> x, std::vector<double> f) : x_(std::move(x)), f_(std::move(f)) {
    detail::require(x_.size() >= 2 && x_.size() == f_.size(), "CDF table needs >= 2 matching points");
    for (std::size_t i = 1; i < x_.size(); ++i) {
      if (!(x_[i] > x_[i - 1])) throw InvalidArgument("CDF abscissae must be strictly increasing");
      if (f_[i] < f_[i - 1]) throw InvalidArgument("CDF values must be nondecreasing");
    }
  }

  /// Integrates a 1-D density over `cells` uniform cells with an 8-point Gauss rule each.
  static TabulatedCdf from_density(const ScalarFn& pdf, int cells = 4096) {
    detail::require(cells >= 1, "CDF needs at least one cell");
    static const QuadRule1D local = gauss_rule(8);
    std::vector<double> x(cells + 1), f(cells + 1, 0.0);
    const double h = 1.0 / cells;
    for (int c = 0; c <= cells; ++c) x[c] = c * h;
    x[cells] = 1.0;
    for (int c = 0; c < cells; ++c) {
      double s = 0.0;
      for (int a = 0; a < local.order(); ++a) {
        const double v = pdf(x[c] + h * local.nodes[a]);
        if (!std::isfinite(v) || v < 0.0) throw NumericalError("invalid density value while tabulating CDF");
        s += local.weights[a] * v;
      }
      f[c + 1] = f[c] + s * h;
    }
    const double total = f[cells];
    if (!(total > 0.0)) throw NumericalError("density has zero mass");
    for (double& v : f) v /= total;
    f[cells] = 1.0;
    return TabulatedCdf(std::move(x), std::move(f));
  }

  const std::vector<double>& x() const { return x_; }
  const std::vector<double>& f() const { return f_; }

  /// Piecewise-linear CDF; 0 left of the table and 1 right of it.
  double operator()(double t) const {
    if (t <= x_.front()) return t < x_.front() ? 0.0 : f_.front();
    if (t >= x_.back()) return 1.0;
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double s = (t - x_[i]) / (x_[i + 1] - x_[i]);
    return f_[i] + s * (f_[i + 1] - f_[i]);
  }

  /// Generalized inverse of the piecewise-linear CDF.
  double inverse(double u) const {
    if (u <= 0.0) return x_.front();
    if (u >= 1.0) return x_.back();
    const auto it = std::upper_bound(f_.begin(), f_.end(), u);
    std::size_t i = static_cast<std::size_t>(it - f_.begin());
    if (i == 0) return x_.front();
    if (i >= f_.size()) return x_.back();
    --i;
    const double df = f_[i + 1] - f_[i];
    const double s = df > 0.0 ? (u - f_[i]) / df : 0.0;
    return std::clamp(x_[i] + s * (x_[i + 1] - x_[i]), 0.0, 1.0);
  }

 private:
  std::vector<double> x_;
  std::vector<double> f_;
};

// ---------------------------------------------------------------------------
// Sampling.

inline constexpr int kSamplingCells = 1 << 14;

/// Inverse-CDF sampler for a product density. The per-dimension CDF tables are
/// built once, so repeated draws from the same density are cheap.
class ProductSampler {
 public:
  explicit ProductSampler(const std::vector<ScalarFn>& marginals, int cells = kSamplingCells) {
    cdfs_.reserve(marginals.size());
    for (const auto& m : marginals) cdfs_.push_back(TabulatedCdf::from_density(m, cells));
  }

  int dim() const { return static_cast<int>(cdfs_.size()); }

  Sample draw(std::size_t k, Rng& rng) const {
    detail::require(k >= 1, "sample size must be >= 1");
    const int d = dim();
    Sample s{d, std::vector<double>(k * d), rng.seed()};
    for (std::size_t r = 0; r < k; ++r) {
      for (int j = 0; j < d; ++j) s.data[r * d + j] = cdfs_[j].inverse(rng.uniform01());
    }
    return s;
  }

 private:
  std::vector<TabulatedCdf> cdfs_;
};

inline ProductSampler make_sampler(const GridDensity& p) {
  if (!p.is_product() || !p.has_evaluator()) {
    throw InvalidArgument("sampling supports only 1-D or product-form densities with evaluators");
  }
  std::vector<ScalarFn> marg;
  for (int j = 0; j < p.dim(); ++j) marg.push_back([&p, j](double t) { return p.marginal(j, t); });
  return ProductSampler(marg);
}

inline ProductSampler make_sampler(const ExpFamilyDensity& p) {
  std::vector<ScalarFn> marg;
  for (int j = 0; j < p.dim(); ++j) marg.push_back([&p, j](double t) { return p.factor(j, t); });
  return ProductSampler(marg);
}

/// Per-dimension inverse-CDF sampling; the density must be product-form.
inline Sample draw_sample(const GridDensity& p, std::size_t k, Rng& rng) {
  detail::require(k >= 1, "sample size must be >= 1");
  return make_sampler(p).draw(k, rng);
}

inline Sample draw_sample(const ExpFamilyDensity& p, std::size_t k, Rng& rng) {
  detail::require(k >= 1, "sample size must be >= 1");
  return make_sampler(p).draw(k, rng);
}

template <typename Density>
Sample draw_sample(const Density& p, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  return draw_sample(p, k, rng);
}

}  // namespace momentda
