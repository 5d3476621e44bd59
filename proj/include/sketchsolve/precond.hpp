#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "sketchsolve/common.hpp"
#include "sketchsolve/problem.hpp"

namespace sketchsolve {

enum class FactorMethod { QR, SVD };

inline std::string_view to_string(FactorMethod m) { return m == FactorMethod::QR ? "qr" : "svd"; }

/// Factorization of H_S = (SA)^T (SA) used to apply H_S^{-1}.
///
/// QR path stores R (upper triangular, positive diagonal) with SA = QR, so
/// H_S = R^T R. SVD path stores sigma and V of SA = U diag(sigma) V^T.
class PreconditionerFactor {
 public:
  FactorMethod method() const noexcept { return method_; }
  Index dim() const noexcept { return d_; }
  bool rank_ok() const noexcept { return rank_ok_; }

  const Matrix& r() const noexcept { return r_; }
  const Vector& sigma() const noexcept { return sigma_; }
  const Matrix& v() const noexcept { return v_; }

  /// Flops charged for the factorization.
  std::uint64_t flops() const noexcept { return flops_; }

  friend PreconditionerFactor factorize(const Matrix& sa, FactorMethod method);

 private:
  FactorMethod method_ = FactorMethod::QR;
  Index d_ = 0;
  bool rank_ok_ = false;
  Matrix r_;
  Vector sigma_;
  Matrix v_;
  std::uint64_t flops_ = 0;
};

/// Factors SA (m x d, m >= d). Throws RankError when the numerical rank of SA
/// is below d, which usually means the sketch is too small.
inline PreconditionerFactor factorize(const Matrix& sa, FactorMethod method = FactorMethod::QR) {
  const Index m = sa.rows();
  const Index d = sa.cols();
  if (m < d)
    throw DimensionError("factorize: sketched matrix is " + std::to_string(m) + " x " + std::to_string(d) +
                         ", need m >= d");
  PreconditionerFactor f;
  f.method_ = method;
  f.d_ = d;
  const double md2 = static_cast<double>(m) * static_cast<double>(d) * static_cast<double>(d);
  if (method == FactorMethod::QR) {
    Eigen::HouseholderQR<Matrix> qr(sa);
    f.r_ = qr.matrixQR().topRows(d).triangularView<Eigen::Upper>();
    for (Index i = 0; i < d; ++i)
      if (f.r_(i, i) < 0.0) f.r_.row(i) = -f.r_.row(i);
    const double hi = f.r_.diagonal().maxCoeff();
    const double lo = f.r_.diagonal().minCoeff();
    if (!(lo > kRankTol * hi))
      throw RankError("factorize: sketched matrix has numerical rank < d (min |R_ii| / max = " +
                      std::to_string(lo / hi) + "); increase the sketch size");
    f.flops_ = static_cast<std::uint64_t>(2.0 * md2 - 2.0 * std::pow(static_cast<double>(d), 3) / 3.0);
  } else {
    Eigen::BDCSVD<Matrix> svd(sa, Eigen::ComputeThinV);
    f.sigma_ = svd.singularValues();
    f.v_ = svd.matrixV();
    if (!(f.sigma_(d - 1) > kRankTol * f.sigma_(0)))
      throw RankError("factorize: sketched matrix has numerical rank < d (sigma_min / sigma_max = " +
                      std::to_string(f.sigma_(d - 1) / f.sigma_(0)) + "); increase the sketch size");
    f.flops_ = static_cast<std::uint64_t>(4.0 * md2 + 8.0 * std::pow(static_cast<double>(d), 3));
  }
  f.rank_ok_ = true;
  return f;
}

/// x = H_S^{-1} r.
inline Vector solve(const PreconditionerFactor& f, const Vector& r) {
  if (r.size() != f.dim()) throw DimensionError("solve: right-hand side has wrong length");
  if (!f.rank_ok()) throw RankError("solve: factor is not usable");
  if (f.method() == FactorMethod::QR) {
    Vector y = f.r().transpose().triangularView<Eigen::Lower>().solve(r);
    f.r().triangularView<Eigen::Upper>().solveInPlace(y);
    return y;
  }
  const Vector c = (f.v().transpose() * r).cwiseQuotient(f.sigma().cwiseAbs2());
  return f.v() * c;
}

inline std::uint64_t solve_flops(const PreconditionerFactor& f) {
  return static_cast<std::uint64_t>(2 * f.dim() * f.dim());
}

}  // namespace sketchsolve
