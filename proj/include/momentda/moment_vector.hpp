#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "momentda/error.hpp"
#include "momentda/polybasis.hpp"

namespace momentda {

/// Expectations of the basis features phi_m under a density or a sample,
/// stored in the TensorBasis dimension-major order.
class MomentVector {
 public:
  MomentVector() = default;
  MomentVector(TensorBasis basis, std::vector<double> values) : basis_(std::move(basis)), values_(std::move(values)) {
    if (values_.size() != basis_.size()) {
      throw InvalidArgument("moment vector length " + std::to_string(values_.size()) + " != m*N = " +
                            std::to_string(basis_.size()));
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw InvalidArgument("moment vector has a non-finite entry");
    }
  }

  const TensorBasis& basis() const { return basis_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double at(int j, int i) const { return values_[basis_.index(j, i)]; }

  /// Moments of dimension j (orders 1..m).
  std::span<const double> block(int j) const {
    return std::span<const double>(values_).subspan(static_cast<std::size_t>(j) * basis_.degree(),
                                                    basis_.degree());
  }

  /// Every entry within the range of its feature on [0,1], |eta_i| <= sqrt(2i+1).
  bool in_feature_range() const {
    const int m = basis_.degree();
    for (std::size_t k = 0; k < values_.size(); ++k) {
      const int order = static_cast<int>(k % m) + 1;
      if (std::abs(values_[k]) > std::sqrt(2.0 * order + 1.0)) return false;
    }
    return true;
  }

 private:
  TensorBasis basis_;
  std::vector<double> values_;
};

}  // namespace momentda
