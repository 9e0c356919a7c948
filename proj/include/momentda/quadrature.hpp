#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "momentda/error.hpp"

namespace momentda {

inline constexpr int kMinGaussOrder = 2;
inline constexpr int kMaxGaussOrder = 512;

/// Gauss-Legendre rule mapped to [0,1]; nodes ascending, weights sum to 1.
struct QuadRule1D {
  std::vector<double> nodes;
  std::vector<double> weights;

  int order() const { return static_cast<int>(nodes.size()); }
};

inline QuadRule1D gauss_rule(int n) {
  if (n < kMinGaussOrder || n > kMaxGaussOrder) {
    throw InvalidArgument("Gauss order " + std::to_string(n) + " outside [" +
                          std::to_string(kMinGaussOrder) + ", " + std::to_string(kMaxGaussOrder) + "]");
  }
  QuadRule1D rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess for the i-th largest root on [-1,1]; long double
    // keeps the nodes near the ends accurate after mapping to [0,1].
    long double z = std::cos(std::numbers::pi_v<long double> * (i + 0.75L) / (n + 0.5L));
    long double dp = 0.0L;
    for (int iter = 0; iter < 100; ++iter) {
      long double p0 = 1.0L;
      long double p1 = z;
      for (int k = 2; k <= n; ++k) {
        const long double p2 = ((2.0L * k - 1.0L) * z * p1 - (k - 1.0L) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0L);
      const long double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-18L) break;
    }
    const long double w = 1.0L / ((1.0L - z * z) * dp * dp);  // half of the [-1,1] weight
    rule.nodes[i] = static_cast<double>(0.5L * (1.0L - z));
    rule.nodes[n - 1 - i] = static_cast<double>(0.5L * (1.0L + z));
    rule.weights[i] = static_cast<double>(w);
    rule.weights[n - 1 - i] = static_cast<double>(w);
  }
  return rule;
}

/// Default per-dimension Gauss order for an N-dimensional tensor grid.
inline int default_order(int dim) {
  if (dim <= 3) return 128;
  if (dim <= 5) return 32;
  return 16;
}

/// Tensor-product grid. Node index is row-major: dimension 0 varies slowest.
class QuadGridND {
 public:
  QuadGridND() = default;
  QuadGridND(int dim, const QuadRule1D& rule) : rules_(static_cast<std::size_t>(dim), rule) {
    detail::require(dim >= 1, "grid dimension must be >= 1");
    init();
  }
  explicit QuadGridND(std::vector<QuadRule1D> rules) : rules_(std::move(rules)) {
    detail::require(!rules_.empty(), "grid dimension must be >= 1");
    init();
  }
  static QuadGridND with_order(int dim, int n) { return QuadGridND(dim, gauss_rule(n)); }
  static QuadGridND default_for(int dim) { return with_order(dim, default_order(dim)); }

  int dim() const { return static_cast<int>(rules_.size()); }
  const QuadRule1D& rule(int j) const { return rules_[j]; }
  std::size_t size() const { return size_; }

  /// Coordinate index of node `idx` along dimension j.
  std::size_t coord_index(std::size_t idx, int j) const { return (idx / strides_[j]) % rules_[j].order(); }

  void node(std::size_t idx, std::span<double> x) const {
    for (int j = 0; j < dim(); ++j) x[j] = rules_[j].nodes[coord_index(idx, j)];
  }
  double weight(std::size_t idx) const {
    double w = 1.0;
    for (int j = 0; j < dim(); ++j) w *= rules_[j].weights[coord_index(idx, j)];
    return w;
  }

  /// Calls fn(idx, x, w) for every node in index order.
  template <typename Fn>
  void for_each_node(Fn&& fn) const {
    std::vector<double> x(dim());
    for (std::size_t idx = 0; idx < size_; ++idx) {
      node(idx, x);
      fn(idx, std::span<const double>(x), weight(idx));
    }
  }

  bool same_as(const QuadGridND& other) const {
    if (dim() != other.dim()) return false;
    for (int j = 0; j < dim(); ++j) {
      if (rules_[j].nodes != other.rules_[j].nodes || rules_[j].weights != other.rules_[j].weights) return false;
    }
    return true;
  }

 private:
  void init() {
    strides_.assign(rules_.size(), 1);
    size_ = 1;
    for (int j = dim() - 1; j >= 0; --j) {
      strides_[j] = size_;
      size_ *= static_cast<std::size_t>(rules_[j].order());
    }
  }

  std::vector<QuadRule1D> rules_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

using Integrand = std::function<double(std::span<const double>)>;

namespace detail {
inline std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}
}  // namespace detail

/// Weighted sum over the tensor nodes, accumulated in node-index order.
inline double integrate(const Integrand& f, const QuadGridND& grid) {
  double acc = 0.0;
  grid.for_each_node([&](std::size_t, std::span<const double> x, double w) {
    const double v = f(x);
    if (!std::isfinite(v)) {
      throw NumericalError("non-finite integrand value at node " + detail::format_point(x));
    }
    acc += w * v;
  });
  return acc;
}

inline double integrate_1d(const std::function<double(double)>& f, const QuadRule1D& rule) {
  double acc = 0.0;
  for (int i = 0; i < rule.order(); ++i) {
    const double v = f(rule.nodes[i]);
    if (!std::isfinite(v)) {
      throw NumericalError("non-finite integrand value at node (" + std::to_string(rule.nodes[i]) + ")");
    }
    acc += rule.weights[i] * v;
  }
  return acc;
}

struct CheckedIntegral {
  double value = 0.0;
  double self_convergence = 0.0;  ///< |I(n) - I(2n)|
};

/// Integrates with order n and 2n per dimension and fails if they differ by more than tol.
inline CheckedIntegral integrate_checked(const Integrand& f, int dim, int n, double tol = 1e-10) {
  const int n2 = std::min(2 * n, kMaxGaussOrder);
  const double coarse = integrate(f, QuadGridND::with_order(dim, n));
  const double fine = integrate(f, QuadGridND::with_order(dim, n2));
  CheckedIntegral out{fine, std::abs(fine - coarse)};
  if (out.self_convergence > tol) {
    throw ResolutionError("quadrature self-convergence " + std::to_string(out.self_convergence) +
                          " exceeds tolerance at order " + std::to_string(n));
  }
  return out;
}

}  // namespace momentda
