#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <Eigen/SVD>

#include "sketchsolve/common.hpp"
#include "sketchsolve/rng.hpp"
#include "sketchsolve/sketch.hpp"

namespace sketchsolve {

/// Relative singular-value floor below which A (or SA) is treated as rank deficient.
inline constexpr double kRankTol = 1e-12;

/// Quadratic f(x) = 1/2 <x, A^T A x> - <b, x> with A of size n x d, n >= d.
///
/// For least-squares data (A, y) with y in R^n the linear term is b = A^T y.
struct LeastSquaresProblem {
  Matrix A;
  Vector b;
  std::uint64_t seed = 0;  // 0 for loaded data

  Index n() const noexcept { return A.rows(); }
  Index d() const noexcept { return A.cols(); }
};

inline void validate(const LeastSquaresProblem& p) {
  if (p.d() < 1 || p.n() < p.d())
    throw DimensionError("problem: need n >= d >= 1, got n=" + std::to_string(p.n()) +
                         ", d=" + std::to_string(p.d()));
  if (p.b.size() != p.d())
    throw DimensionError("problem: b has length " + std::to_string(p.b.size()) + ", expected d=" +
                         std::to_string(p.d()));
  if (!p.A.allFinite() || !p.b.allFinite()) throw DomainError("problem: non-finite entries");
}

/// Builds the problem for least-squares data (A, y): b = A^T y.
inline LeastSquaresProblem from_least_squares(Matrix a, const Vector& y, std::uint64_t seed = 0) {
  if (y.size() != a.rows())
    throw DimensionError("from_least_squares: y has length " + std::to_string(y.size()) +
                         ", A has " + std::to_string(a.rows()) + " rows");
  LeastSquaresProblem p{std::move(a), Vector(), seed};
  p.b = p.A.transpose() * y;
  validate(p);
  return p;
}

/// Synthetic instance A = U0 D V0^T with Haar-distributed orthonormal factors
/// and D log-spaced from 1 down to 1/cond; b = A^T y with y standard normal.
inline LeastSquaresProblem generate_synthetic(Index n, Index d, double cond, std::uint64_t seed) {
  if (d < 2) throw DimensionError("generate_synthetic: need d >= 2");
  if (n < d) throw DimensionError("generate_synthetic: need n >= d");
  if (!std::isfinite(cond) || cond < 1.0) throw DomainError("generate_synthetic: cond must be finite and >= 1");

  Rng rng = make_rng(seed);
  const Matrix u0 = haar_orthonormal(n, d, rng);
  const Matrix v0 = haar_orthonormal(d, d, rng);
  Vector diag(d);
  for (Index i = 0; i < d; ++i)
    diag(i) = std::pow(cond, -static_cast<double>(i) / static_cast<double>(d - 1));
  Matrix a = u0 * diag.asDiagonal() * v0.transpose();
  const Vector y = standard_normal(n, rng);
  return from_least_squares(std::move(a), y, seed);
}

/// Thin SVD A = U diag(sigma) V^T and the exact minimizer x*.
struct ErrorOracle {
  Matrix U;       // n x d
  Vector sigma;   // nonincreasing, all > 0
  Matrix V;       // d x d
  Vector x_star;

  /// H^{1/2} = U^T A = diag(sigma) V^T.
  Matrix sqrt_hessian() const { return sigma.asDiagonal() * V.transpose(); }
};

inline ErrorOracle compute_oracle(const LeastSquaresProblem& p) {
  validate(p);
  Eigen::BDCSVD<Matrix> svd(p.A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ErrorOracle o{svd.matrixU(), svd.singularValues(), svd.matrixV(), Vector()};
  const Index d = p.d();
  if (!(o.sigma(d - 1) > kRankTol * o.sigma(0)))
    throw RankError("compute_oracle: A is numerically rank deficient (sigma_min/sigma_max = " +
                    std::to_string(o.sigma(d - 1) / o.sigma(0)) + ")");
  // x* = V diag(sigma^-2) V^T b
  const Vector coeff = (o.V.transpose() * p.b).cwiseQuotient(o.sigma.cwiseAbs2());
  o.x_star = o.V * coeff;
  return o;
}

/// Delta = H^{1/2} (x - x*).
inline Vector error_vector(const ErrorOracle& o, const Vector& x) {
  if (x.size() != o.x_star.size()) throw DimensionError("error_vector: dimension mismatch");
  return o.sigma.asDiagonal() * (o.V.transpose() * (x - o.x_star));
}

/// delta = 1/2 ||x - x*||_H^2.
inline double error_delta(const ErrorOracle& o, const Vector& x) {
  return 0.5 * error_vector(o, x).squaredNorm();
}

/// Eigenvalues of C_S = (S U)^T (S U), sorted nonincreasing.
inline Vector spectrum_cs(const Matrix& u, const SketchOperator& s) {
  if (s.cols() != u.rows()) throw DimensionError("spectrum_cs: sketch and U disagree on n");
  const Matrix su = apply(s, u);
  const Matrix cs = su.transpose() * su;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cs, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().reverse();
}

inline Vector spectrum_cs(const ErrorOracle& o, const SketchOperator& s) { return spectrum_cs(o.U, s); }

}  // namespace sketchsolve
