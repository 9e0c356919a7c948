#pragma once

// Command-line front end: fit, certify, distance, experiment, basis.
//
// Exit codes: 0 success, 1 usage/parse/invalid input, 2 infeasible fit,
// 3 fit hit the iteration limit, 4 experiment criteria failed.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "momentda/bounds.hpp"
#include "momentda/density.hpp"
#include "momentda/experiments.hpp"
#include "momentda/maxent.hpp"
#include "momentda/metrics.hpp"
#include "momentda/polybasis.hpp"
#include "momentda/random.hpp"

namespace momentda::cli {

enum ExitCode : int { kOk = 0, kError = 1, kInfeasible = 2, kMaxIterations = 3, kCriteriaFailed = 4 };

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Input parsing.

struct TextPosition {
  std::size_t line = 1;
  std::size_t column = 1;
};

/// 1-based line/column of the byte at `offset` (0-based).
inline TextPosition position_of(const std::string& text, std::size_t offset) {
  TextPosition p;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++p.line;
      p.column = 1;
    } else {
      ++p.column;
    }
  }
  return p;
}

inline ParseError parse_error_at(const std::string& origin, TextPosition p, const std::string& what) {
  return ParseError(origin + ":" + std::to_string(p.line) + ":" + std::to_string(p.column) + ": " + what);
}

inline std::string read_text(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline bool looks_like_json(const std::string& text) {
  const auto i = text.find_first_not_of(" \t\r\n");
  return i != std::string::npos && (text[i] == '[' || text[i] == '{');
}

inline nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t off = e.byte > 0 ? e.byte - 1 : 0;
    std::string what = e.what();
    if (const auto k = what.find("parse error"); k != std::string::npos) what = what.substr(k);
    throw parse_error_at(origin, position_of(text, off), what);
  }
}

/// Moment values from CSV or whitespace-separated text ('#' starts a comment)
/// or from a JSON array of numbers.
inline std::vector<double> parse_moments(const std::string& text, const std::string& origin = "<moments>") {
  std::vector<double> out;
  if (looks_like_json(text)) {
    const auto j = parse_json_text(text, origin);
    if (!j.is_array()) throw ParseError(origin + ": expected a JSON array of numbers");
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (!j[i].is_number()) throw ParseError(origin + ": element " + std::to_string(i) + " is not a number");
      out.push_back(j[i].get<double>());
    }
    return out;
  }
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    const bool blank = line.find_first_not_of(" \t") == std::string::npos;
    if (!blank) {
      const bool commas = line.find(',') != std::string::npos;
      std::size_t pos = 0;
      while (pos <= line.size()) {
        std::size_t stop = commas ? line.find(',', pos) : line.find_first_of(" \t", pos);
        if (stop == std::string::npos) stop = line.size();
        std::size_t a = pos;
        std::size_t b = stop;
        while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
        while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t')) --b;
        if (a == b) {
          if (commas) throw parse_error_at(origin, {line_no, a + 1}, "empty field");
        } else {
          double v = 0.0;
          const char* first = line.data() + a;
          const char* last = line.data() + b;
          if (*first == '+') ++first;
          const auto [ptr, ec] = std::from_chars(first, last, v);
          if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
            throw parse_error_at(origin, {line_no, a + 1}, "expected a finite number, got '" + line.substr(a, b - a) + "'");
          }
          out.push_back(v);
        }
        if (stop == line.size()) break;
        pos = stop + 1;
      }
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  if (out.empty()) throw ParseError(origin + ": no moment values found");
  return out;
}

/// A density argument: always a grid tabulation, plus the exponential-family
/// form when the spec is one.
struct DensityArg {
  nlohmann::json spec;
  GridDensity grid;
  std::optional<ExpFamilyDensity> expfam;
  int dim() const { return grid.dim(); }
};

namespace detail {

inline void only_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& what) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ParseError(what + ": unknown key '" + k + "'");
  }
}

inline double number_at(const nlohmann::json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) throw ParseError(what + ": missing '" + key + "'");
  if (!j[key].is_number()) throw ParseError(what + ": '" + key + "' must be a number");
  return j[key].get<double>();
}

inline int int_at(const nlohmann::json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key)) throw ParseError(what + ": missing '" + key + "'");
  if (!j[key].is_number_integer()) throw ParseError(what + ": '" + key + "' must be an integer");
  return j[key].get<int>();
}

inline std::vector<double> numbers_at(const nlohmann::json& j, const std::string& key, const std::string& what) {
  std::vector<double> v;
  if (j[key].is_number()) return {j[key].get<double>()};
  if (!j[key].is_array()) throw ParseError(what + ": '" + key + "' must be a number or an array of numbers");
  for (const auto& e : j[key]) {
    if (!e.is_number()) throw ParseError(what + ": '" + key + "' must hold numbers only");
    v.push_back(e.get<double>());
  }
  return v;
}

}  // namespace detail

/// truncnorm {mean, sigma} (arrays give a product), expfam {m, N, lambda},
/// uniform {N}.
inline DensityArg density_from_spec(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ParseError("density spec must be an object with a string 'type'");
  }
  const std::string type = j["type"];
  DensityArg d;
  d.spec = j;
  if (type == "truncnorm") {
    detail::only_keys(j, {"type", "mean", "sigma"}, "truncnorm");
    if (!j.contains("mean") || !j.contains("sigma")) throw ParseError("truncnorm: needs 'mean' and 'sigma'");
    const auto mean = detail::numbers_at(j, "mean", "truncnorm");
    const auto sigma = detail::numbers_at(j, "sigma", "truncnorm");
    if (mean.size() != sigma.size() || mean.empty()) throw ParseError("truncnorm: 'mean' and 'sigma' lengths differ");
    std::vector<GridDensity> parts;
    for (std::size_t i = 0; i < mean.size(); ++i) parts.push_back(momentda::detail::resolved_truncated_normal(mean[i], sigma[i]).first);
    d.grid = parts.size() == 1 ? parts[0] : make_product(parts);
  } else if (type == "expfam") {
    detail::only_keys(j, {"type", "m", "N", "lambda"}, "expfam");
    const int m = detail::int_at(j, "m", "expfam");
    const int n = j.contains("N") ? detail::int_at(j, "N", "expfam") : 1;
    if (n < 1) throw InvalidArgument("expfam: N must be >= 1");
    if (!j.contains("lambda")) throw ParseError("expfam: missing 'lambda'");
    const auto lambda = detail::numbers_at(j, "lambda", "expfam");
    d.expfam = ExpFamilyDensity(TensorBasis(n, m), lambda);
    d.grid = n == 1 ? momentda::detail::grid_of(*d.expfam) : d.expfam->to_grid();
  } else if (type == "uniform") {
    detail::only_keys(j, {"type", "N"}, "uniform");
    const int n = j.contains("N") ? detail::int_at(j, "N", "uniform") : 1;
    if (n < 1) throw InvalidArgument("uniform: N must be >= 1");
    d.grid = make_uniform(n);
  } else {
    throw ParseError("unknown density type '" + type + "' (truncnorm|expfam|uniform)");
  }
  return d;
}

/// Inline JSON when the argument starts with '{', otherwise a file path.
inline DensityArg load_density(const std::string& arg) {
  if (looks_like_json(arg)) return density_from_spec(parse_json_text(arg, "<inline spec>"));
  return density_from_spec(parse_json_text(read_text(arg), arg));
}

inline std::string int128_to_string(PolyBasis1D::Int v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  unsigned __int128 u = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
  std::string s;
  while (u > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (neg) s.push_back('-');
  return {s.rbegin(), s.rend()};
}

inline nlohmann::json int128_json(PolyBasis1D::Int v) {
  if (v >= std::numeric_limits<std::int64_t>::min() && v <= std::numeric_limits<std::int64_t>::max()) {
    return static_cast<std::int64_t>(v);
  }
  return int128_to_string(v);
}

// ---------------------------------------------------------------------------
// Subcommands.

struct GlobalOptions {
  std::string format = "json";
  int threads = 1;
};

namespace detail {

inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Writes to --out when given, else to stdout.
inline void emit(const std::string& text, const std::string& out_path, std::ostream& out, std::ostream& err) {
  if (out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream os(out_path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + out_path);
  os << text;
  err << "wrote " << out_path << "\n";
}

inline std::map<std::string, std::string> key_values(const std::vector<std::string>& items) {
  std::map<std::string, std::string> kv;
  for (const auto& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("--param expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

inline double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidArgument(key + ": not a number: '" + v + "'");
  return x;
}

inline int to_int(const std::string& key, const std::string& v) {
  int x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidArgument(key + ": not an integer: '" + v + "'");
  return x;
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= v.size()) {
    std::size_t stop = v.find(',', pos);
    if (stop == std::string::npos) stop = v.size();
    out.push_back(to_double(key, v.substr(pos, stop - pos)));
    pos = stop + 1;
  }
  return out;
}

}  // namespace detail

struct FitArgs {
  std::string moments_file;
  int m = 0;
  int N = 1;
  double tol = 1e-9;
  int max_iter = 200;
  int order = 128;
  std::string out;
};

inline int run_fit(const FitArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto values = parse_moments(read_text(a.moments_file), a.moments_file);
  if (a.m < 1 || a.N < 1) throw InvalidArgument("--m and --N must be >= 1");
  if (values.size() != static_cast<std::size_t>(a.m) * a.N) {
    throw InvalidArgument("expected m*N = " + std::to_string(a.m * a.N) + " moments, read " + std::to_string(values.size()));
  }
  FitOptions opt;
  opt.tol = a.tol;
  opt.max_iter = a.max_iter;
  opt.order = a.order;
  const auto fit = fit_maxent(MomentVector(TensorBasis(a.N, a.m), values), opt);
  std::string text;
  if (g.format == "csv") {
    std::ostringstream os;
    os << "dimension,degree,lambda\n";
    for (int j = 0; j < a.N; ++j) {
      for (int i = 1; i <= a.m; ++i) os << j << "," << i << "," << detail::num(fit.density.lambda()[fit.density.basis().index(j, i)]) << "\n";
    }
    text = os.str();
  } else {
    text = nlohmann::json(fit).dump(2) + "\n";
  }
  detail::emit(text, a.out, out, err);
  err << "fit: " << to_string(fit.status) << " after " << fit.iterations << " iterations, residual " << fit.residual << "\n";
  switch (fit.status) {
    case FitStatus::kConverged: return kOk;
    case FitStatus::kInfeasible: return kInfeasible;
    case FitStatus::kMaxIterations: return kMaxIterations;
  }
  return kError;
}

struct CertifyArgs {
  std::string preset;
  std::optional<double> k;
  std::optional<int> d;
  std::optional<double> delta;
  std::optional<int> m;
  std::optional<int> N;
  std::optional<int> r;
  std::optional<double> c_inf;
  std::optional<double> c_r;
  double moment_distance = 0.0;
  double epsilon = 0.0;
  double risk = 0.0;
  double lambda_star = 0.0;
  std::string form = "standard";
  std::string out;
};

inline int run_certify(const CertifyArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  CertificateInputs in;
  BoundConstant C;
  if (!a.preset.empty()) {
    if (a.preset != "section7") throw InvalidArgument("unknown preset '" + a.preset + "' (section7)");
    ReferencePreset s;
    if (a.k) s.k = *a.k;
    if (a.d) s.d = *a.d;
    if (a.delta) s.delta = *a.delta;
    if (a.m) s.m = *a.m;
    if (a.N) s.N = *a.N;
    if (a.r) s.r = *a.r;
    if (a.c_inf) s.c_inf = *a.c_inf;
    if (a.c_r) s.c_r = *a.c_r;
    in = {s.k, s.d, s.delta, s.m, s.N};
    C = section7_constant(s);
  } else {
    if (!a.k || !a.d || !a.m) throw InvalidArgument("certify needs --k, --d and --m (or --preset)");
    in.k = *a.k;
    in.d = *a.d;
    in.m = *a.m;
    in.delta = a.delta.value_or(0.2);
    in.N = a.N.value_or(1);
    if (a.c_inf || a.c_r) {
      if (!a.c_inf || !a.c_r) throw InvalidArgument("improved constants need both --c-inf and --c-r");
      C = BoundConstant::from(improved_constants(in.m, a.r.value_or(in.m), *a.c_inf, *a.c_r));
    } else {
      if (in.m < 2) throw InvalidArgument("m must be >= 2");
      C = BoundConstant::simple(in.m);
    }
  }
  in.moment_distance = a.moment_distance;
  in.epsilon = a.epsilon;
  in.empirical_source_risk = a.risk;
  in.lambda_star = a.lambda_star;
  if (a.form == "standard") {
    in.form = SampleSizeForm::kStandard;
  } else if (a.form == "sharp") {
    in.form = SampleSizeForm::kSharp;
  } else {
    throw InvalidArgument("--sample-size-form must be standard|sharp");
  }
  auto cert = theorem2_certificate(in, C);
  if (!a.preset.empty()) {
    cert.notes.push_back(kReferenceSamplingNote);
  }
  const double e = std::numbers::e;
  const double moment_coef = std::sqrt(2.0 * e * C.C);
  const double sampling_coef = std::sqrt(8.0 * C.C * in.m / in.delta);
  std::string text;
  if (g.format == "csv") {
    std::ostringstream os;
    os << "kind,name,value,required,ok\n";
    os << "constant,C," << detail::num(C.C) << ",,\n";
    os << "constant,gamma," << detail::num(C.gamma) << ",,\n";
    os << "constant,xi," << detail::num(C.xi) << ",,\n";
    os << "coefficient,moment," << detail::num(moment_coef) << ",,\n";
    os << "coefficient,sampling," << detail::num(sampling_coef) << ",,\n";
    for (const auto& c : cert.conditions) {
      os << "condition," << momentda::csv_cell(c.name) << "," << detail::num(c.actual) << "," << detail::num(c.required)
         << "," << (c.ok ? "true" : "false") << "\n";
    }
    for (const auto& [n, v] : cert.terms) os << "term," << n << "," << detail::num(v) << ",,\n";
    os << "total,total," << (cert.total ? detail::num(*cert.total) : std::string()) << ",,"
       << (cert.total ? "true" : "false") << "\n";
    text = os.str();
  } else {
    nlohmann::json j = cert;
    j["coefficients"] = {{"moment", moment_coef}, {"sampling", sampling_coef}};
    text = j.dump(2) + "\n";
  }
  detail::emit(text, a.out, out, err);
  if (!cert.total) err << "certify: conditions not satisfied; total is null\n";
  return kOk;
}

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"l1", "kl", "moment-l1", "cmd", "levy"};
  return names;
}

struct DistanceArgs {
  std::string p;
  std::string q;
  std::string metric = "l1";
  int m = 5;
  std::size_t samples = 0;
  std::optional<std::uint64_t> seed;
  std::string out;
};

inline int run_distance(const DistanceArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto& names = metric_names();
  if (std::find(names.begin(), names.end(), a.metric) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : "|") + n;
    err << "error: unsupported metric '" << a.metric << "'; supported: " << list << "\n";
    return kError;
  }
  const auto p = load_density(a.p);
  const auto q = load_density(a.q);
  if (p.dim() != q.dim()) {
    throw InvalidArgument("density dimensions differ: " + std::to_string(p.dim()) + " vs " + std::to_string(q.dim()));
  }
  nlohmann::json extra = nlohmann::json::object();
  double value = 0.0;
  if (a.metric == "l1") {
    value = l1_distance(p.grid, q.grid);
  } else if (a.metric == "kl") {
    value = kl_divergence(p.grid, q.grid);
  } else if (a.metric == "moment-l1") {
    const TensorBasis basis(p.dim(), a.m);
    value = moment_l1(moments(p.grid, basis), moments(q.grid, basis));
    extra["m"] = a.m;
  } else if (a.metric == "cmd") {
    extra["m"] = a.m;
    if (a.samples > 0) {
      if (!a.seed) throw InvalidArgument("sampled cmd needs an explicit --seed");
      auto rp = Rng::substream(*a.seed, 0);
      auto rq = Rng::substream(*a.seed, 1);
      value = cmd(draw_sample(p.grid, a.samples, rp), draw_sample(q.grid, a.samples, rq), a.m);
      extra["samples"] = a.samples;
      extra["seed"] = *a.seed;
    } else {
      value = cmd(p.grid, q.grid, a.m);
    }
  } else {
    if (p.dim() != 1) throw InvalidArgument("levy metric needs 1-D densities");
    value = levy_metric(cdf_of(p.grid), cdf_of(q.grid));
  }
  std::string text;
  if (g.format == "csv") {
    text = "metric,value\n" + a.metric + "," + detail::num(value) + "\n";
  } else {
    nlohmann::json j = {{"metric", a.metric}, {"value", value}, {"p", p.spec}, {"q", q.spec}};
    j.update(extra);
    text = j.dump(2) + "\n";
  }
  detail::emit(text, a.out, out, err);
  return kOk;
}

struct ExperimentArgs {
  std::string name;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::vector<std::string> params;
  std::string out = ".";
};

inline bool experiment_is_stochastic(const std::string& name) {
  return name == "theorem1-verify" || name == "sample-concentration" || name == "toy-demo";
}

/// Builds and runs one experiment; unknown names and parameter keys throw.
inline ExperimentRecord run_named_experiment(const std::string& name, std::uint64_t seed,
                                             const std::map<std::string, std::string>& kv, const RunOptions& run) {
  auto reject_unknown = [&](const std::set<std::string>& allowed) {
    for (const auto& [k, v] : kv) {
      if (!allowed.count(k)) throw InvalidArgument("experiment " + name + ": unknown parameter '" + k + "'");
    }
  };
  auto has = [&](const std::string& k) { return kv.count(k) > 0; };
  if (name == "truncated-normal") {
    reject_unknown({"sigmas", "mean_gap", "center", "m"});
    TruncatedNormalParams p;
    if (has("sigmas")) p.sigmas = detail::to_doubles("sigmas", kv.at("sigmas"));
    if (has("mean_gap")) p.mean_gap = detail::to_double("mean_gap", kv.at("mean_gap"));
    if (has("center")) p.center = detail::to_double("center", kv.at("center"));
    if (has("m")) p.m = detail::to_int("m", kv.at("m"));
    return truncated_normal_counterexample(p, seed, run);
  }
  if (name == "theorem1-verify") {
    reject_unknown({"trials", "m", "lambda_radius", "perturb_min", "perturb_max"});
    MomentL1TrialParams p;
    if (has("trials")) p.trials = detail::to_int("trials", kv.at("trials"));
    if (has("m")) p.m = detail::to_int("m", kv.at("m"));
    if (has("lambda_radius")) p.lambda_radius = detail::to_double("lambda_radius", kv.at("lambda_radius"));
    if (has("perturb_min")) p.perturb_min = detail::to_double("perturb_min", kv.at("perturb_min"));
    if (has("perturb_max")) p.perturb_max = detail::to_double("perturb_max", kv.at("perturb_max"));
    return theorem1_empirical_verification(p, seed, run);
  }
  if (name == "sample-concentration") {
    reject_unknown({"trials", "delta", "ks", "lambda"});
    SampleConcentrationParams p;
    if (has("trials")) p.trials = detail::to_int("trials", kv.at("trials"));
    if (has("delta")) p.delta = detail::to_double("delta", kv.at("delta"));
    if (has("lambda")) p.lambda = detail::to_doubles("lambda", kv.at("lambda"));
    if (has("ks")) {
      p.ks.clear();
      for (double k : detail::to_doubles("ks", kv.at("ks"))) {
        if (!(k >= 1.0) || k != std::floor(k)) throw InvalidArgument("ks: sample sizes must be positive integers");
        p.ks.push_back(static_cast<std::size_t>(k));
      }
    }
    return sample_concentration(p, seed, run);
  }
  if (name == "section7-repro") {
    reject_unknown({});
    return section7_repro(seed);
  }
  if (name == "toy-demo") {
    reject_unknown({"scenario", "k"});
    ToyParams p;
    const auto sc = toy_scenario(has("scenario") ? kv.at("scenario") : "shift");
    if (has("k")) p.k = static_cast<std::size_t>(detail::to_int("k", kv.at("k")));
    return toy_adaptation_demo(sc, seed, p, run);
  }
  if (name == "levy-probe") {
    reject_unknown({"mean", "sigma", "m", "shifts"});
    LevyProbeParams p;
    if (has("mean")) p.mean = detail::to_double("mean", kv.at("mean"));
    if (has("sigma")) p.sigma = detail::to_double("sigma", kv.at("sigma"));
    if (has("m")) p.m = detail::to_int("m", kv.at("m"));
    if (has("shifts")) p.shifts = detail::to_doubles("shifts", kv.at("shifts"));
    return levy_relation_probe(p, seed, run);
  }
  std::string list;
  for (const auto& n : experiment_names()) list += (list.empty() ? "" : "|") + n;
  throw InvalidArgument("unknown experiment '" + name + "' (" + list + ")");
}

inline int run_experiment(const ExperimentArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), a.name) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : "|") + n;
    throw InvalidArgument("unknown experiment '" + a.name + "' (" + list + ")");
  }
  if (experiment_is_stochastic(a.name) && !a.seed) throw InvalidArgument("experiment " + a.name + " needs --seed");
  auto kv = detail::key_values(a.params);
  if (a.trials) {
    if (kv.count("trials")) throw InvalidArgument("trials given twice");
    kv["trials"] = std::to_string(*a.trials);
  }
  RunOptions run;
  run.threads = g.threads;
  const auto rec = run_named_experiment(a.name, a.seed.value_or(0), kv, run);
  const auto [csv, js] = write_record(rec, a.out);
  err << "wrote " << csv.string() << " and " << js.string() << "\n";
  if (g.format == "csv") {
    write_csv(out, rec);
  } else {
    out << nlohmann::json(rec).dump(2) << "\n";
  }
  for (const auto& c : rec.criteria) err << (c.ok ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
  return rec.passed() ? kOk : kCriteriaFailed;
}

struct BasisArgs {
  int m = 5;
  std::string out;
};

inline int run_basis(const BasisArgs& a, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  const auto b = build_legendre_basis(a.m);
  std::string text;
  if (g.format == "csv") {
    std::ostringstream os;
    os << "n,power,integer_coefficient,coefficient\n";
    for (int n = 0; n <= a.m; ++n) {
      for (int k = 0; k <= n; ++k) {
        os << n << "," << k << "," << int128_to_string(b.integer_coeff(n, k)) << "," << detail::num(b.coeff(n, k)) << "\n";
      }
    }
    text = os.str();
  } else {
    nlohmann::json rows = nlohmann::json::array();
    for (int n = 0; n <= a.m; ++n) {
      nlohmann::json ints = nlohmann::json::array();
      nlohmann::json reals = nlohmann::json::array();
      for (int k = 0; k <= n; ++k) {
        ints.push_back(int128_json(b.integer_coeff(n, k)));
        reals.push_back(b.coeff(n, k));
      }
      rows.push_back({{"n", n}, {"scale", "sqrt(" + std::to_string(2 * n + 1) + ")"}, {"integer_coefficients", ints},
                      {"coefficients", reals}});
    }
    text = nlohmann::json({{"m", a.m}, {"interval", {0, 1}}, {"rows", rows}}).dump(2) + "\n";
  }
  detail::emit(text, a.out, out, err);
  return kOk;
}

// ---------------------------------------------------------------------------
// Entry point.

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Moment-based domain adaptation toolkit: maximum-entropy fits, distances, bound certificates, "
               "experiments.\nExit codes: 0 ok, 1 usage/parse/input error, 2 infeasible fit, 3 fit iteration "
               "limit, 4 experiment criteria failed.",
               "momentda"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);
  GlobalOptions g;
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for experiments")->check(CLI::Range(1, 1024))->capture_default_str();

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit the maximum-entropy density to a moment vector");
  fit->add_option("moments", fa.moments_file, "Moments file (CSV, whitespace or JSON array; '-' for stdin), "
                                              "dimension-major, m values per dimension")->required();
  fit->add_option("--m", fa.m, "Polynomial degree per dimension")->required()->check(CLI::Range(1, kMaxBasisDegree));
  fit->add_option("--N", fa.N, "Dimension")->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_option("--tol", fa.tol, "Moment residual tolerance (infinity norm)")->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_option("--max-iter", fa.max_iter, "Newton iteration limit")->check(CLI::PositiveNumber)->capture_default_str();
  fit->add_option("--order", fa.order, "Gauss-Legendre order")->check(CLI::Range(2, kMaxGaussOrder))->capture_default_str();
  fit->add_option("--out", fa.out, "Write the result here instead of stdout");

  CertifyArgs ca;
  auto* cert = app.add_subcommand("certify", "Evaluate the target-risk certificate (constants, conditions, terms)");
  cert->add_option("--preset", ca.preset, "Parameter preset; flags override its values")->check(CLI::IsMember({"section7"}));
  cert->add_option("--k", ca.k, "Sample size per domain");
  cert->add_option("--d", ca.d, "VC dimension of the classifier family");
  cert->add_option("--delta", ca.delta, "Failure probability in (0,1) (default 0.2)");
  cert->add_option("--m", ca.m, "Moment order");
  cert->add_option("--N", ca.N, "Input dimension (default 1)");
  cert->add_option("--r", ca.r, "Sobolev order for improved constants (default m)");
  cert->add_option("--c-inf", ca.c_inf, "Sup-norm bound on log-densities (selects improved constants)");
  cert->add_option("--c-r", ca.c_r, "Sobolev seminorm bound (selects improved constants)");
  cert->add_option("--moment-distance", ca.moment_distance, "l1 distance of the sample moment vectors")->capture_default_str();
  cert->add_option("--epsilon", ca.epsilon, "Entropy gap")->capture_default_str();
  cert->add_option("--risk", ca.risk, "Empirical source risk")->capture_default_str();
  cert->add_option("--lambda-star", ca.lambda_star, "Combined risk of the best joint classifier")->capture_default_str();
  cert->add_option("--sample-size-form", ca.form, "Sample-size condition form")->check(CLI::IsMember({"standard", "sharp"}))->capture_default_str();
  cert->add_option("--out", ca.out, "Write the result here instead of stdout");

  DistanceArgs da;
  std::uint64_t dseed = 0;
  auto* dist = app.add_subcommand("distance", "Distance between two densities given as JSON specs");
  dist->add_option("p", da.p, "Density spec: inline JSON or file")->required();
  dist->add_option("q", da.q, "Density spec: inline JSON or file")->required();
  dist->add_option("--metric", da.metric, "l1|kl|moment-l1|cmd|levy")->capture_default_str();
  dist->add_option("--m", da.m, "Moment order for moment-l1 and cmd")->check(CLI::Range(1, kMaxBasisDegree))->capture_default_str();
  dist->add_option("--samples", da.samples, "cmd only: use k samples per density instead of population moments");
  auto* dseed_opt = dist->add_option("--seed", dseed, "Seed for sampled cmd");
  dist->add_option("--out", da.out, "Write the result here instead of stdout");

  ExperimentArgs ea;
  std::uint64_t eseed = 0;
  int etrials = 0;
  auto* exp = app.add_subcommand("experiment", "Run an experiment and write {name}-{seed}.csv/.json");
  std::string exp_list;
  for (const auto& n : experiment_names()) exp_list += (exp_list.empty() ? "" : "|") + n;
  exp->add_option("name", ea.name, exp_list)->required();
  auto* eseed_opt = exp->add_option("--seed", eseed, "Seed (required for stochastic experiments)");
  auto* etrials_opt = exp->add_option("--trials", etrials, "Trial count (theorem1-verify, sample-concentration)")->check(CLI::PositiveNumber);
  exp->add_option("--param", ea.params, "Experiment parameter key=value (repeatable; lists comma-separated)");
  exp->add_option("--out", ea.out, "Output directory")->capture_default_str();

  BasisArgs ba;
  auto* basis = app.add_subcommand("basis", "Dump orthonormal shifted-Legendre coefficients");
  basis->add_option("--m", ba.m, "Highest degree")->check(CLI::Range(1, kMaxBasisDegree))->capture_default_str();
  basis->add_option("--out", ba.out, "Write the result here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (const auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << "run 'momentda " << sub->get_name() << " --help' for usage\n";
    } else {
      err << "run 'momentda --help' for usage\n";
    }
    return kError;
  }

  try {
    if (fit->parsed()) return run_fit(fa, g, out, err);
    if (cert->parsed()) return run_certify(ca, g, out, err);
    if (dist->parsed()) {
      if (dseed_opt->count()) da.seed = dseed;
      return run_distance(da, g, out, err);
    }
    if (exp->parsed()) {
      if (eseed_opt->count()) ea.seed = eseed;
      if (etrials_opt->count()) ea.trials = etrials;
      return run_experiment(ea, g, out, err);
    }
    if (basis->parsed()) return run_basis(ba, g, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}

}  // namespace momentda::cli
