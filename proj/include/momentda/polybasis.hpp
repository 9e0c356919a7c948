#pragma once

// Orthonormal shifted-Legendre bases on [0,1].
//
// eta_n(x) = sqrt(2n+1) * P_n(2x-1). The shifted polynomials P_n(2x-1) have
// integer monomial coefficients, so they are built exactly with 128-bit
// integers and only the final sqrt(2n+1) scaling is done in floating point.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "momentda/error.hpp"

namespace momentda {

inline constexpr int kMaxBasisDegree = 30;

class PolyBasis1D {
 public:
  using Int = __int128;

  PolyBasis1D() = default;

  int degree() const { return degree_; }

  /// Monomial coefficient of x^power in eta_row.
  double coeff(int row, int power) const { return coeffs_[row][power]; }
  const std::vector<std::vector<double>>& coeffs() const { return coeffs_; }

  /// Integer coefficient of x^power in P_row(2x-1) (unnormalized).
  Int integer_coeff(int row, int power) const { return int_coeffs_[row][power]; }
  double scale(int row) const { return std::sqrt(2.0 * row + 1.0); }

  /// Writes eta_1(x)..eta_m(x) into out (size m). Three-term recurrence on t = 2x-1.
  void eval_into(double x, std::span<double> out) const {
    const double t = 2.0 * x - 1.0;
    double prev = 1.0;
    double cur = t;
    for (int n = 1; n <= degree_; ++n) {
      if (n > 1) {
        const double next = ((2.0 * n - 1.0) * t * cur - (n - 1.0) * prev) / n;
        prev = cur;
        cur = next;
      }
      out[n - 1] = scale(n) * cur;
    }
  }

  /// eta_0..eta_m at x.
  std::vector<double> eval_all(double x) const {
    std::vector<double> out(degree_ + 1);
    out[0] = 1.0;
    eval_into(x, std::span<double>(out).subspan(1));
    return out;
  }

  /// k-th derivative of eta_n at x, from the exact monomial expansion.
  double derivative(int n, int k, double x) const {
    long double acc = 0.0L;
    for (int p = degree_; p >= 0; --p) {
      long double c = 0.0L;
      if (p >= k && p <= n) {
        long double falling = 1.0L;
        for (int s = 0; s < k; ++s) falling *= static_cast<long double>(p - s);
        c = static_cast<long double>(int_coeffs_[n][p]) * falling;
      }
      if (p >= k) acc = acc * x + c;
    }
    return static_cast<double>(acc) * scale(n);
  }

  friend PolyBasis1D build_legendre_basis(int m);

 private:
  int degree_ = 0;
  std::vector<std::vector<Int>> int_coeffs_;
  std::vector<std::vector<double>> coeffs_;
};

/// eta_0..eta_m as monomial coefficient rows; 1 <= m <= 30.
inline PolyBasis1D build_legendre_basis(int m) {
  if (m < 1 || m > kMaxBasisDegree) {
    throw InvalidArgument("basis degree " + std::to_string(m) + " outside [1, " +
                          std::to_string(kMaxBasisDegree) + "]");
  }
  using Int = PolyBasis1D::Int;
  PolyBasis1D b;
  b.degree_ = m;
  b.int_coeffs_.assign(m + 1, std::vector<Int>(m + 1, 0));
  b.int_coeffs_[0][0] = 1;
  b.int_coeffs_[1][0] = -1;
  b.int_coeffs_[1][1] = 2;
  // (n+1) P_{n+1} = (2n+1)(2x-1) P_n - n P_{n-1}
  for (int n = 1; n < m; ++n) {
    const auto& pn = b.int_coeffs_[n];
    const auto& pm = b.int_coeffs_[n - 1];
    auto& out = b.int_coeffs_[n + 1];
    for (int p = 0; p <= n + 1; ++p) {
      Int v = 0;
      if (p >= 1) v += 2 * pn[p - 1];
      if (p <= n) v -= pn[p];
      v *= (2 * n + 1);
      if (p <= n - 1) v -= static_cast<Int>(n) * pm[p];
      if (v % (n + 1) != 0) throw NumericalError("non-integral Legendre coefficient");
      out[p] = v / (n + 1);
    }
  }
  b.coeffs_.assign(m + 1, std::vector<double>(m + 1, 0.0));
  for (int n = 0; n <= m; ++n) {
    for (int p = 0; p <= n; ++p) {
      b.coeffs_[n][p] = b.scale(n) * static_cast<double>(b.int_coeffs_[n][p]);
    }
  }
  return b;
}

/// Gram matrix of eta_0..eta_m under the uniform measure, integrated exactly
/// with rational arithmetic on the integer coefficients.
inline std::vector<std::vector<double>> gram_matrix(const PolyBasis1D& basis) {
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::cpp_rational;
  const int m = basis.degree();
  auto to_big = [](PolyBasis1D::Int v) {
    const bool neg = v < 0;
    unsigned __int128 u = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
    cpp_int hi = static_cast<std::uint64_t>(u >> 64);
    cpp_int r = (hi << 64) + static_cast<std::uint64_t>(u);
    return neg ? cpp_int(-r) : r;
  };
  std::vector<std::vector<double>> g(m + 1, std::vector<double>(m + 1, 0.0));
  for (int i = 0; i <= m; ++i) {
    for (int j = i; j <= m; ++j) {
      cpp_rational acc = 0;
      for (int a = 0; a <= i; ++a) {
        const cpp_int ca = to_big(basis.integer_coeff(i, a));
        if (ca == 0) continue;
        for (int c = 0; c <= j; ++c) {
          const cpp_int cc = to_big(basis.integer_coeff(j, c));
          acc += cpp_rational(ca * cc, a + c + 1);
        }
      }
      const double v = static_cast<double>(acc) * basis.scale(i) * basis.scale(j);
      g[i][j] = v;
      g[j][i] = v;
    }
  }
  return g;
}

/// Per-dimension copies of one PolyBasis1D; features ordered dimension-major:
/// feature (j, i) for dimension j in [0, N) and order i in [1, m] sits at
/// index j*m + (i-1).
class TensorBasis {
 public:
  TensorBasis() = default;
  TensorBasis(int dim, PolyBasis1D per_dim) : dim_(dim), per_dim_(std::move(per_dim)) {
    detail::require(dim >= 1, "tensor basis dimension must be >= 1");
  }
  TensorBasis(int dim, int m) : TensorBasis(dim, build_legendre_basis(m)) {}

  int dim() const { return dim_; }
  int degree() const { return per_dim_.degree(); }
  std::size_t size() const { return static_cast<std::size_t>(dim_) * per_dim_.degree(); }
  std::size_t index(int j, int i) const {
    return static_cast<std::size_t>(j) * per_dim_.degree() + (i - 1);
  }
  const PolyBasis1D& per_dim() const { return per_dim_; }

  bool same_as(const TensorBasis& other) const {
    return dim_ == other.dim_ && degree() == other.degree();
  }

 private:
  int dim_ = 0;
  PolyBasis1D per_dim_;
};

/// phi_m(x): entry (j,i) is eta_i(x_j).
inline std::vector<double> eval_basis(const TensorBasis& basis, std::span<const double> x) {
  if (static_cast<int>(x.size()) != basis.dim()) {
    throw InvalidArgument("point dimension " + std::to_string(x.size()) +
                          " does not match basis dimension " + std::to_string(basis.dim()));
  }
  const int m = basis.degree();
  std::vector<double> out(basis.size());
  for (int j = 0; j < basis.dim(); ++j) {
    if (!(x[j] >= 0.0 && x[j] <= 1.0)) {
      throw InvalidArgument("point coordinate " + std::to_string(j) + " = " +
                            std::to_string(x[j]) + " outside [0,1]");
    }
    basis.per_dim().eval_into(x[j], std::span<double>(out).subspan(j * m, m));
  }
  return out;
}

struct CoefficientSums {
  std::vector<double> r;  ///< r[i-1] = sum of |coefficient of x^i| over eta_1..eta_m
  double c_max = 0.0;     ///< max_i r_i
};

inline CoefficientSums coefficient_abs_sums(const PolyBasis1D& basis) {
  const int m = basis.degree();
  CoefficientSums out;
  out.r.assign(m, 0.0);
  for (int power = 1; power <= m; ++power) {
    double s = 0.0;
    for (int n = 1; n <= m; ++n) s += std::abs(basis.coeff(n, power));
    out.r[power - 1] = s;
    out.c_max = std::max(out.c_max, s);
  }
  return out;
}

/// Number of monomials of total degree 1..m in N variables: C(N+m, m) - 1.
inline std::uint64_t count_monomials(int m, int n_vars) {
  detail::require(m >= 1 && n_vars >= 1, "count_monomials requires m, N >= 1");
  // C(N+m, m) built incrementally as C(N+i, i); each step is exact.
  unsigned __int128 c = 1;
  for (int i = 1; i <= m; ++i) {
    c = c * static_cast<unsigned>(n_vars + i);
    c /= static_cast<unsigned>(i);
    if (c > static_cast<unsigned __int128>(UINT64_MAX)) {
      throw InvalidArgument("count_monomials overflows 64 bits for m=" + std::to_string(m) +
                            ", N=" + std::to_string(n_vars));
    }
  }
  return static_cast<std::uint64_t>(c) - 1;
}

inline void to_json(nlohmann::json& j, const PolyBasis1D& b) { j = b.coeffs(); }

}  // namespace momentda
