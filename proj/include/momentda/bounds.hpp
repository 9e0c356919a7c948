#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "momentda/error.hpp"
#include "momentda/metrics.hpp"
#include "momentda/moment_vector.hpp"
#include "momentda/smoothness.hpp"

namespace momentda {

// ---------------------------------------------------------------------------
// Constants.

/// 2 e^{(3m-1)/2}.
inline double constant_C_simple(int m) {
  if (m < 2) throw InvalidArgument("constant C needs m >= 2, got " + std::to_string(m));
  return 2.0 * std::exp((3.0 * m - 1.0) / 2.0);
}

struct ImprovedConstants {
  int m = 0;
  int r = 0;
  double c_inf = 0.0;
  double c_r = 0.0;
  double gamma = 0.0;
  double xi = 0.0;
  double C = 0.0;
  double log_C = 0.0;
  /// 4 e^{4 gamma + 1} e^{c_inf/2} (m+1) xi; the constants hold when <= 1.
  double applicability_lhs = 0.0;
  bool applicable = false;
};

inline void to_json(nlohmann::json& j, const ImprovedConstants& c) {
  j = {{"m", c.m}, {"r", c.r}, {"c_inf", c.c_inf}, {"c_r", c.c_r}, {"gamma", c.gamma}, {"xi", c.xi},
       {"C", c.C}, {"log_C", c.log_C}, {"applicability_lhs", c.applicability_lhs}, {"applicable", c.applicable}};
}

/// Constants of the moment-to-KL estimate for log-densities in W_2^r.
/// Products of exponentials and the falling product in xi^2 are evaluated in
/// log space.
inline ImprovedConstants improved_constants(int m, int r, double c_inf, double c_r) {
  if (r < 2 || m < r) throw InvalidArgument("improved constants need m >= r >= 2");
  if (!(c_inf >= 0.0) || !(c_r >= 0.0) || !std::isfinite(c_inf) || !std::isfinite(c_r)) {
    throw InvalidArgument("improved constants need finite c_inf, c_r >= 0");
  }
  ImprovedConstants out{m, r, c_inf, c_r};
  if (c_r > 0.0) {
    const double log_gamma = r - r * std::log(2.0) - 0.5 * std::log(r - 1.0) - (r - 1.0) * std::log(double(m + r)) +
                             std::log(c_r);
    double log_prod = 0.0;
    for (int v = m - r + 2; v <= m + r + 1; ++v) log_prod += std::log(double(v));
    const double log_xi = 0.5 * (c_inf - r * std::log(4.0) - log_prod) + std::log(c_r);
    out.gamma = std::exp(log_gamma);
    out.xi = std::exp(log_xi);
  }
  const double coupling = 4.0 * std::exp(4.0 * out.gamma + 1.0 + c_inf / 2.0) * (m + 1.0) * out.xi;
  out.applicability_lhs = coupling;
  out.applicable = coupling <= 1.0;
  out.log_C = std::log(2.0) + 1.0 + c_inf + 2.0 * out.gamma + coupling;
  out.C = std::exp(out.log_C);
  return out;
}

/// The constant a bound is evaluated with.
struct BoundConstant {
  int m = 0;
  double C = 0.0;
  double gamma = 0.0;
  double xi = 0.0;
  double c_inf = 0.0;
  std::string source;  // "simple" | "improved"
  std::optional<ImprovedConstants> improved;

  static BoundConstant simple(int m) { return {m, constant_C_simple(m), 0.0, 0.0, 0.0, "simple", std::nullopt}; }
  static BoundConstant from(const ImprovedConstants& c) { return {c.m, c.C, c.gamma, c.xi, c.c_inf, "improved", c}; }
};

inline void to_json(nlohmann::json& j, const BoundConstant& c) {
  j = {{"C", c.C}, {"gamma", c.gamma}, {"xi", c.xi}, {"source", c.source}};
}

// ---------------------------------------------------------------------------
// Conditions and certificates.

struct Condition {
  std::string name;
  double required = 0.0;
  double actual = 0.0;
  std::string relation;  // "<=" or ">="
  bool ok = false;

  static Condition at_most(std::string name, double actual, double required) {
    return {std::move(name), required, actual, "<=", actual <= required};
  }
  static Condition at_least(std::string name, double actual, double required) {
    return {std::move(name), required, actual, ">=", actual >= required};
  }
};

inline void to_json(nlohmann::json& j, const Condition& c) {
  j = {{"name", c.name}, {"required", c.required}, {"actual", c.actual}, {"relation", c.relation}, {"ok", c.ok}};
}

/// A bound value together with the gate it passed (or failed).
struct GatedBound {
  std::optional<double> value;
  std::vector<Condition> conditions;

  bool applicable() const { return value.has_value(); }
};

inline void to_json(nlohmann::json& j, const GatedBound& b) {
  j = {{"conditions", b.conditions}, {"value", b.value ? nlohmann::json(*b.value) : nlohmann::json(nullptr)}};
}

namespace detail {
inline void require_epsilon(double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be finite and >= 0");
}

inline std::vector<Condition> constant_conditions(const BoundConstant& c) {
  std::vector<Condition> out;
  if (c.improved) out.push_back(Condition::at_most("improved constants applicable", c.improved->applicability_lhs, 1.0));
  return out;
}

inline bool all_ok(const std::vector<Condition>& cs) {
  for (const auto& c : cs) {
    if (!c.ok) return false;
  }
  return true;
}
}  // namespace detail

/// ||p - q||_{L1} <= sqrt(2C) ||mu_p - mu_q||_1 + sqrt(8 eps), valid when
/// ||mu_p - mu_q||_1 <= 1 / (2C(m+1)).
inline GatedBound theorem1_l1_bound(double moment_distance, double epsilon, const BoundConstant& c) {
  detail::require_epsilon(epsilon);
  if (!(moment_distance >= 0.0)) throw InvalidArgument("moment distance must be >= 0");
  GatedBound out;
  out.conditions = detail::constant_conditions(c);
  out.conditions.push_back(Condition::at_most("moment distance", moment_distance, 1.0 / (2.0 * c.C * (c.m + 1))));
  if (detail::all_ok(out.conditions)) out.value = std::sqrt(2.0 * c.C) * moment_distance + std::sqrt(8.0 * epsilon);
  return out;
}

inline GatedBound theorem1_l1_bound(const MomentVector& mu_p, const MomentVector& mu_q, double epsilon,
                                    const BoundConstant& c) {
  if (mu_p.basis().degree() != c.m) throw InvalidArgument("constant computed for a different moment order");
  return theorem1_l1_bound(moment_l1(mu_p, mu_q), epsilon, c);
}

/// Target risk <= source risk + the moment L1 bound terms + lambda*.
inline GatedBound corollary1_risk_bound(double moment_distance, double epsilon, double source_risk, double lambda_star,
                                        const BoundConstant& c) {
  GatedBound out = theorem1_l1_bound(moment_distance, epsilon, c);
  if (out.value) *out.value += source_risk + lambda_star;
  return out;
}

/// sqrt((4/k)(d log(2ek/d) + log(4/delta))).
inline double vc_generalization_term(double k, int d, double delta) {
  if (!(d >= 1) || !(k > d)) throw InvalidArgument("VC term needs k > d >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  return std::sqrt(4.0 / k * (d * std::log(2.0 * std::numbers::e * k / d) + std::log(4.0 / delta)));
}

enum class SampleSizeForm { kStandard, kSharp };

/// Smallest k with 4C^2(m+1)^2 m / delta <= k; the sharp form carries the
/// extra factor e^{-c_inf}.
inline double minimal_sample_size(const BoundConstant& c, double delta, SampleSizeForm form = SampleSizeForm::kStandard) {
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  const double m = c.m;
  double k = 4.0 * c.C * c.C * (m + 1) * (m + 1) * m / delta;
  if (form == SampleSizeForm::kSharp) k *= std::exp(-c.c_inf);
  return k;
}

/// D(p* || p_hat) <= C e^{-c_inf} m / (k delta), holding with probability
/// at least 1 - delta.
inline double sample_kl_bound(const BoundConstant& c, double k, double delta) {
  if (!(k > 0.0)) throw InvalidArgument("sample size must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  return c.C * std::exp(-c.c_inf) * c.m / (k * delta);
}

struct CertificateInputs {
  double k = 0.0;
  int d = 1;
  double delta = 0.2;
  int m = 5;
  int N = 1;
  double moment_distance = 0.0;  // ||mu_hat_p - mu_hat_q||_1
  double epsilon = 0.0;
  double empirical_source_risk = 0.0;
  double lambda_star = 0.0;
  SampleSizeForm form = SampleSizeForm::kStandard;
};

struct BoundCertificate {
  CertificateInputs inputs;
  BoundConstant constant;
  std::vector<Condition> conditions;
  std::vector<std::pair<std::string, double>> terms;
  std::optional<double> total;
  std::vector<std::string> notes;

  double term(const std::string& name) const {
    for (const auto& [n, v] : terms) {
      if (n == name) return v;
    }
    throw InvalidArgument("no certificate term named " + name);
  }
  const Condition& condition(const std::string& name) const {
    for (const auto& c : conditions) {
      if (c.name == name) return c;
    }
    throw InvalidArgument("no certificate condition named " + name);
  }
  bool applicable() const { return total.has_value(); }
};

inline void to_json(nlohmann::json& j, const CertificateInputs& in) {
  j = {{"k", in.k}, {"d", in.d}, {"delta", in.delta}, {"m", in.m}, {"N", in.N},
       {"moment_distance", in.moment_distance}, {"epsilon", in.epsilon},
       {"empirical_source_risk", in.empirical_source_risk}, {"lambda_star", in.lambda_star},
       {"sample_size_form", in.form == SampleSizeForm::kStandard ? "standard" : "sharp"}};
}

inline void to_json(nlohmann::json& j, const BoundCertificate& c) {
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& [n, v] : c.terms) terms[n] = v;
  j = nlohmann::json::object();
  j["inputs"] = c.inputs;
  j["constants"] = c.constant;
  j["conditions"] = c.conditions;
  j["terms"] = terms;
  j["total"] = c.total ? nlohmann::json(*c.total) : nlohmann::json(nullptr);
  j["notes"] = c.notes;
}

/// Target-risk certificate from sample moments. Terms: empirical risk, VC
/// term, sqrt(2eC)||dmu_hat||_1, sqrt(8C) sqrt(Nm/(k delta)), sqrt(8 eps), lambda*.
/// The total is set only when every condition holds.
inline BoundCertificate theorem2_certificate(const CertificateInputs& in, const BoundConstant& c) {
  if (!(in.k > 0.0) || !std::isfinite(in.k)) throw InvalidArgument("k must be positive");
  if (in.d < 1) throw InvalidArgument("VC dimension d must be >= 1");
  if (!(in.k > in.d)) throw InvalidArgument("k must exceed d");
  if (!(in.delta > 0.0 && in.delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
  if (in.m < 2) throw InvalidArgument("m must be >= 2");
  if (in.N < 1) throw InvalidArgument("N must be >= 1");
  if (in.m != c.m) throw InvalidArgument("constant computed for a different moment order");
  if (!(in.moment_distance >= 0.0) || !std::isfinite(in.moment_distance)) {
    throw InvalidArgument("moment distance must be finite and >= 0");
  }
  detail::require_epsilon(in.epsilon);
  if (!(in.empirical_source_risk >= 0.0 && in.empirical_source_risk <= 1.0)) {
    throw InvalidArgument("empirical risk must lie in [0,1]");
  }
  if (!(in.lambda_star >= 0.0) || !std::isfinite(in.lambda_star)) throw InvalidArgument("lambda* must be >= 0");

  BoundCertificate cert;
  cert.inputs = in;
  cert.constant = c;
  cert.conditions = detail::constant_conditions(c);
  cert.conditions.push_back(Condition::at_least("sample size", in.k, minimal_sample_size(c, in.delta, in.form)));
  cert.conditions.push_back(Condition::at_most("sample moment distance", in.moment_distance,
                                               1.0 / (2.0 * (in.m + 1) * std::numbers::e * c.C)));
  const double e = std::numbers::e;
  cert.terms = {
      {"empirical_risk", in.empirical_source_risk},
      {"vc", vc_generalization_term(in.k, in.d, in.delta)},
      {"moment", std::sqrt(2.0 * e * c.C) * in.moment_distance},
      {"sampling", std::sqrt(8.0 * c.C) * std::sqrt(double(in.N) * in.m / (in.k * in.delta))},
      {"entropy", std::sqrt(8.0 * in.epsilon)},
      {"lambda_star", in.lambda_star},
  };
  if (detail::all_ok(cert.conditions)) {
    double s = 0.0;
    for (const auto& [n, v] : cert.terms) s += v;
    cert.total = s;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// Worked application: m = r = 5, c_inf = 5, c_r = 10, delta = 0.2, N = 5, d = 6.

inline constexpr const char* kReferenceSamplingNote =
    "sampling term is recomputed (0.01444); the reference value 0.0148 matches sampling + vc terms";

struct ReferencePreset {
  int m = 5;
  int r = 5;
  double c_inf = 5.0;
  double c_r = 10.0;
  double delta = 0.2;
  int N = 5;
  int d = 6;
  double k = 6.3e9;
};

inline BoundConstant section7_constant(const ReferencePreset& s = {}) {
  return BoundConstant::from(improved_constants(s.m, s.r, s.c_inf, s.c_r));
}

inline BoundCertificate section7_certificate(const ReferencePreset& s = {}, double moment_distance = 0.0,
                                             double epsilon = 0.0, double empirical_source_risk = 0.0,
                                             double lambda_star = 0.0) {
  CertificateInputs in;
  in.k = s.k;
  in.d = s.d;
  in.delta = s.delta;
  in.m = s.m;
  in.N = s.N;
  in.moment_distance = moment_distance;
  in.epsilon = epsilon;
  in.empirical_source_risk = empirical_source_risk;
  in.lambda_star = lambda_star;
  auto cert = theorem2_certificate(in, section7_constant(s));
  cert.notes.push_back(kReferenceSamplingNote);
  return cert;
}

/// Factor turning a CMD value into a moment-l1 bound:
/// C_m * m^2 * (m+1) * max_t binom(m,t) * sqrt(N).
inline double cmd_to_moment_bound(int N, double C_m, int m = 5) {
  if (N < 1) throw InvalidArgument("N must be >= 1");
  if (!(C_m > 0.0)) throw InvalidArgument("coefficient sum must be positive");
  if (m < 1) throw InvalidArgument("m must be >= 1");
  double max_binom = 1.0;
  double b = 1.0;
  for (int t = 1; t <= m; ++t) {
    b = b * (m - t + 1) / t;
    max_binom = std::max(max_binom, b);
  }
  return C_m * m * m * (m + 1.0) * max_binom * std::sqrt(double(N));
}

// ---------------------------------------------------------------------------
// Smooth high-entropy class membership.

struct Membership {
  int m = 0;
  double epsilon = 0.0;
  double gap_threshold = 0.0;
  double sup_threshold = 0.0;
  double sobolev_threshold = 0.0;
  bool entropy_ok = false;
  bool sup_ok = false;
  bool sobolev_ok = false;
  bool indeterminate = false;
  double entropy_margin = 0.0;
  double sup_margin = 0.0;
  double sobolev_margin = 0.0;

  bool member() const { return !indeterminate && entropy_ok && sup_ok && sobolev_ok; }
};

inline double sup_threshold(int m) { return (3.0 * m - 6.0) / 2.0; }
inline double sobolev_threshold(int m) { return std::pow(5.0, m - 4); }

/// entropy gap <= eps, ||log p||_inf <= (3m-6)/2, ||d^m log p_i||_{L2} <= 5^{m-4}.
inline Membership smoothness_membership(const SmoothnessReport& rep, int m, double epsilon) {
  detail::require_epsilon(epsilon);
  if (m < 2) throw InvalidArgument("membership needs m >= 2");
  if (rep.m != m) throw InvalidArgument("report computed for a different derivative order");
  Membership v;
  v.m = m;
  v.epsilon = epsilon;
  v.gap_threshold = epsilon;
  v.sup_threshold = sup_threshold(m);
  v.sobolev_threshold = sobolev_threshold(m);
  v.entropy_margin = epsilon - rep.epsilon;
  v.sup_margin = v.sup_threshold - rep.c_inf;
  v.sobolev_margin = v.sobolev_threshold - rep.c_r_max();
  v.entropy_ok = rep.epsilon_resolved() && v.entropy_margin >= -kGapClamp;
  v.sup_ok = v.sup_margin >= 0.0;
  v.sobolev_ok = v.sobolev_margin >= 0.0;
  v.indeterminate = rep.indeterminate() || !rep.epsilon_resolved();
  return v;
}

inline void to_json(nlohmann::json& j, const Membership& v) {
  j = {{"m", v.m},
       {"epsilon", v.epsilon},
       {"member", v.member()},
       {"indeterminate", v.indeterminate},
       {"entropy", {{"ok", v.entropy_ok}, {"threshold", v.gap_threshold}, {"margin", v.entropy_margin}}},
       {"sup", {{"ok", v.sup_ok}, {"threshold", v.sup_threshold}, {"margin", v.sup_margin}}},
       {"sobolev", {{"ok", v.sobolev_ok}, {"threshold", v.sobolev_threshold}, {"margin", v.sobolev_margin}}}};
}

}  // namespace momentda
