#pragma once

// Maximum-entropy densities constrained at polynomial moments.
//
// For moments mu the fitted density is c(lambda) exp(-<lambda, phi>), where
// lambda minimizes the convex dual
//   Gamma(lambda) = <lambda, mu> - log c(lambda) = <lambda, mu> + log Z(lambda),
// with gradient mu - E_q[phi] and Hessian Cov_q[phi]. Because the features are
// univariate terms the problem separates over dimensions; fit_maxent solves
// each 1-D block by damped Newton, fit_maxent_joint solves the coupled problem
// on a tensor grid.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "momentda/density.hpp"
#include "momentda/error.hpp"
#include "momentda/moment_vector.hpp"
#include "momentda/quadrature.hpp"

namespace momentda {

enum class FitStatus { kConverged, kInfeasible, kMaxIterations };

inline const char* to_string(FitStatus s) {
  switch (s) {
    case FitStatus::kConverged: return "converged";
    case FitStatus::kInfeasible: return "infeasible";
    case FitStatus::kMaxIterations: return "max_iterations";
  }
  return "unknown";
}

struct FitOptions {
  double tol = 1e-9;  ///< on the moment residual, infinity norm
  int max_iter = 200;
  int order = 128;    ///< Gauss order of the 1-D integration rule
  double max_condition = 1e12;
};

/// Outcome of one Newton solve on a fixed feature matrix.
struct DualSolve {
  Eigen::VectorXd lambda;
  double log_partition = 0.0;  ///< log Z(lambda) = -log c(lambda)
  double dual_value = 0.0;
  double residual = 0.0;
  int iterations = 0;
  FitStatus status = FitStatus::kConverged;
  std::string message;
  std::vector<double> dual_trace;  ///< Gamma after every accepted step, starting at lambda = 0
};

/// Damped Newton on Gamma for features tabulated at quadrature nodes.
/// `features` is nodes x K, `weights` the node weights, `mu` the K targets.
inline DualSolve solve_dual(const Eigen::MatrixXd& features, const Eigen::VectorXd& weights,
                            const Eigen::VectorXd& mu, const FitOptions& opt) {
  const Eigen::Index n = features.rows();
  const Eigen::Index k = features.cols();
  DualSolve out;
  out.lambda = Eigen::VectorXd::Zero(k);

  Eigen::VectorXd expo(n), q(n);
  auto evaluate = [&](const Eigen::VectorXd& lam, double& log_z) {
    expo.noalias() = -(features * lam);
    const double mx = expo.maxCoeff();
    q = weights.array() * (expo.array() - mx).exp();
    const double s = q.sum();
    log_z = mx + std::log(s);
    q /= s;
    return lam.dot(mu) + log_z;
  };

  double log_z = 0.0;
  double gamma = evaluate(out.lambda, log_z);
  out.dual_trace.push_back(gamma);
  for (int it = 0;; ++it) {
    const Eigen::VectorXd mean = features.transpose() * q;
    const Eigen::VectorXd grad = mu - mean;
    out.residual = grad.cwiseAbs().maxCoeff();
    out.iterations = it;
    out.log_partition = log_z;
    out.dual_value = gamma;
    if (!std::isfinite(out.residual)) {
      out.status = FitStatus::kInfeasible;
      out.message = "non-finite moment residual";
      return out;
    }
    if (out.residual <= opt.tol) {
      out.status = FitStatus::kConverged;
      return out;
    }
    if (it >= opt.max_iter) {
      out.status = FitStatus::kMaxIterations;
      out.message = "max_iter reached with residual " + std::to_string(out.residual);
      return out;
    }
    const Eigen::MatrixXd centered = features.rowwise() - mean.transpose();
    const Eigen::MatrixXd hess = centered.transpose() * q.asDiagonal() * centered;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > opt.max_condition) {
      out.status = FitStatus::kInfeasible;
      out.message = "dual Hessian degenerate (condition " + std::to_string(hi / lo) + ")";
      return out;
    }
    const Eigen::VectorXd step = hess.llt().solve(-grad);
    // Halve until Gamma decreases; the slack absorbs rounding once the
    // remaining decrease is below the resolution of Gamma itself.
    const double slack = 1e-14 * std::max(1.0, std::abs(gamma));
    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 60; ++half, t *= 0.5) {
      Eigen::VectorXd trial = out.lambda + t * step;
      double trial_log_z = 0.0;
      const double g_new = evaluate(trial, trial_log_z);
      if (std::isfinite(g_new) && g_new <= gamma + slack) {
        out.lambda = std::move(trial);
        gamma = g_new;
        log_z = trial_log_z;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      evaluate(out.lambda, log_z);
      out.status = FitStatus::kInfeasible;
      out.message = "line search stagnated with residual " + std::to_string(out.residual);
      return out;
    }
    out.dual_trace.push_back(gamma);
  }
}

struct FitResult {
  ExpFamilyDensity density;
  int iterations = 0;
  double residual = 0.0;    ///< max over dimensions of ||E_q[phi] - mu||_inf
  double dual_value = 0.0;  ///< sum of the per-dimension dual optima
  FitStatus status = FitStatus::kConverged;
  std::string message;
  std::vector<std::vector<double>> dual_traces;  ///< per dimension

  bool ok() const { return status == FitStatus::kConverged; }
};

inline void to_json(nlohmann::json& j, const FitResult& r) {
  j = {{"status", to_string(r.status)},
       {"lambda", r.density.lambda()},
       {"log_norm", r.density.log_norm()},
       {"residual", r.residual},
       {"iterations", r.iterations},
       {"dual_value", r.dual_value},
       {"m", r.density.basis().degree()},
       {"N", r.density.dim()}};
  if (!r.message.empty()) j["message"] = r.message;
}

namespace detail {

inline Eigen::MatrixXd legendre_features(const PolyBasis1D& basis, const QuadRule1D& rule) {
  Eigen::MatrixXd f(rule.order(), basis.degree());
  std::vector<double> phi(basis.degree());
  for (int a = 0; a < rule.order(); ++a) {
    basis.eval_into(rule.nodes[a], phi);
    for (int i = 0; i < basis.degree(); ++i) f(a, i) = phi[i];
  }
  return f;
}

inline int severity(FitStatus s) {
  switch (s) {
    case FitStatus::kConverged: return 0;
    case FitStatus::kMaxIterations: return 1;
    case FitStatus::kInfeasible: return 2;
  }
  return 2;
}

}  // namespace detail

/// Maximum-entropy density with the given moments, fitted one dimension at a time.
inline FitResult fit_maxent(const MomentVector& mu, const FitOptions& opt = {}) {
  detail::require(opt.tol > 0.0, "fit tolerance must be > 0");
  detail::require(opt.max_iter >= 1, "max_iter must be >= 1");
  const auto& basis = mu.basis();
  const int m = basis.degree();
  const QuadRule1D rule = gauss_rule(opt.order);
  const Eigen::MatrixXd features = detail::legendre_features(basis.per_dim(), rule);
  const Eigen::VectorXd weights = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), rule.order());

  FitResult res;
  std::vector<double> lambda(basis.size(), 0.0);
  for (int j = 0; j < basis.dim(); ++j) {
    const auto block = mu.block(j);
    Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(block.data(), m);
    DualSolve s;
    if (!mu.in_feature_range()) {
      s.lambda = Eigen::VectorXd::Zero(m);
      s.status = FitStatus::kInfeasible;
      s.message = "moment vector outside the feature range";
      s.residual = HUGE_VAL;
    } else {
      s = solve_dual(features, weights, target, opt);
    }
    for (int i = 0; i < m; ++i) lambda[basis.index(j, i + 1)] = s.lambda(i);
    res.iterations = std::max(res.iterations, s.iterations);
    res.residual = std::max(res.residual, s.residual);
    res.dual_value += s.dual_value;
    res.dual_traces.push_back(s.dual_trace);
    if (detail::severity(s.status) > detail::severity(res.status)) {
      res.status = s.status;
      res.message = "dimension " + std::to_string(j) + ": " + s.message;
    }
  }
  res.density = ExpFamilyDensity(basis, std::move(lambda), rule);
  return res;
}

/// Joint fit of all m*N moments on a tensor grid, without using the product
/// structure. The coupled problem has the same solution as fit_maxent; this
/// route exists to check that.
struct JointFit {
  TensorBasis basis;
  QuadGridND grid;
  std::vector<double> lambda;
  double log_partition = 0.0;
  double residual = 0.0;
  int iterations = 0;
  FitStatus status = FitStatus::kConverged;

  double log_density(std::span<const double> x) const {
    const auto phi = eval_basis(basis, x);
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) s += lambda[i] * phi[i];
    return -log_partition - s;
  }
};

inline JointFit fit_maxent_joint(const MomentVector& mu, const QuadGridND& grid, const FitOptions& opt = {}) {
  const auto& basis = mu.basis();
  detail::require(grid.dim() == basis.dim(), "grid dimension does not match basis");
  const Eigen::Index n = static_cast<Eigen::Index>(grid.size());
  const Eigen::Index k = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd features(n, k);
  Eigen::VectorXd weights(n);
  grid.for_each_node([&](std::size_t idx, std::span<const double> x, double w) {
    const auto phi = eval_basis(basis, x);
    for (Eigen::Index c = 0; c < k; ++c) features(static_cast<Eigen::Index>(idx), c) = phi[c];
    weights(static_cast<Eigen::Index>(idx)) = w;
  });
  const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(mu.values().data(), k);
  const auto s = solve_dual(features, weights, target, opt);
  JointFit out{basis, grid, std::vector<double>(s.lambda.data(), s.lambda.data() + k), s.log_partition,
               s.residual, s.iterations, s.status};
  return out;
}

// ---------------------------------------------------------------------------

namespace detail {
inline FitOptions options_for(const GridDensity& p, FitOptions opt) {
  opt.order = p.grid().rule(0).order();
  return opt;
}

inline void require_fit(const FitResult& r) {
  if (!r.ok()) throw NumericalError("maximum-entropy fit failed: " + std::string(to_string(r.status)) + " " + r.message);
}
}  // namespace detail

/// h(p*) for the maximum-entropy density p* sharing p's moments.
inline double maxent_entropy(const GridDensity& p, const TensorBasis& basis, FitOptions opt = {}) {
  const auto fit = fit_maxent(moments(p, basis), detail::options_for(p, opt));
  detail::require_fit(fit);
  return entropy(fit.density);
}

inline double maxent_entropy(const ExpFamilyDensity& p, const TensorBasis& basis, FitOptions opt = {}) {
  opt.order = p.rule().order();
  const auto fit = fit_maxent(moments(p, basis), opt);
  detail::require_fit(fit);
  return entropy(fit.density);
}

inline constexpr double kGapClamp = 1e-8;

/// h_phi(p) - h(p) = D(p || p*); values in [-1e-8, 0) are reported as 0.
inline double epsilon_gap(const GridDensity& p, const TensorBasis& basis, FitOptions opt = {}) {
  const double gap = maxent_entropy(p, basis, opt) - entropy(p);
  return (gap < 0.0 && gap >= -kGapClamp) ? 0.0 : gap;
}

inline double epsilon_gap(const ExpFamilyDensity& p, const TensorBasis& basis, FitOptions opt = {}) {
  const double gap = maxent_entropy(p, basis, opt) - entropy(p);
  return (gap < 0.0 && gap >= -kGapClamp) ? 0.0 : gap;
}

}  // namespace momentda
