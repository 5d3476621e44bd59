#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "sketchsolve/common.hpp"
#include "sketchsolve/parallel.hpp"
#include "sketchsolve/problem.hpp"
#include "sketchsolve/rng.hpp"
#include "sketchsolve/sketch.hpp"

namespace sketchsolve {

enum class MomentSource { GaussianExact, HaarApprox, SrhtTraceAsymptotic, MonteCarlo };

inline std::string_view to_string(MomentSource s) {
  switch (s) {
    case MomentSource::GaussianExact: return "gaussian_exact";
    case MomentSource::HaarApprox: return "haar_approx";
    case MomentSource::SrhtTraceAsymptotic: return "srht_trace_asymptotic";
    case MomentSource::MonteCarlo: return "monte_carlo";
  }
  return "unknown";
}

/// First and second inverse moments of C_S = U^T S^T S U, i.e.
/// theta_j = d^{-1} tr E[C_S^{-j}].
struct MomentPair {
  double theta1 = 1.0;
  double theta2 = 1.0;
  MomentSource source = MomentSource::GaussianExact;
  std::optional<std::pair<double, double>> std_errors;  // Monte-Carlo standard errors
  std::size_t failures = 0;  // singular draws skipped (Monte-Carlo)

  /// Refreshed-sketch rate 1 - theta1^2 / theta2.
  double rate() const noexcept { return 1.0 - theta1 * theta1 / theta2; }

  /// Optimal constant IHS step with refreshed sketches.
  double optimal_step() const noexcept { return theta1 / theta2; }
};

/// Exact inverse moments of a Gaussian embedding; finite for m >= d + 4.
inline MomentPair gaussian_moments(Index m, Index d) {
  if (d < 1 || m < d + 4)
    throw DomainError("gaussian_moments: need m >= d + 4 (m=" + std::to_string(m) + ", d=" + std::to_string(d) + ")");
  const double M = static_cast<double>(m);
  const double D = static_cast<double>(d);
  MomentPair p;
  p.theta1 = M / (M - D - 1.0);
  p.theta2 = M * M * (M - 1.0) / ((M - D) * (M - D - 1.0) * (M - D - 3.0));
  p.source = MomentSource::GaussianExact;
  return p;
}

/// Finite-sample approximation for Haar embeddings (orthonormal rows).
inline MomentPair haar_moments(Index n, Index m, Index d) {
  if (!(d < m && m < n))
    throw DomainError("haar_moments: need d < m < n (n=" + std::to_string(n) + ", m=" + std::to_string(m) +
                      ", d=" + std::to_string(d) + ")");
  const double N = static_cast<double>(n);
  const double M = static_cast<double>(m);
  const double D = static_cast<double>(d);
  MomentPair p;
  p.theta1 = (N - D) / (M - D);
  p.theta2 = (N - D) * (D * D + M * N - 2.0 * D * M) / std::pow(M - D, 3);
  p.source = MomentSource::HaarApprox;
  return p;
}

/// Trace-level moments of the SRHT; asymptotically those of Haar. Intended
/// as a step-size heuristic only. Pass the padded size as n.
inline MomentPair srht_trace_moments(Index n, Index m, Index d) {
  MomentPair p = haar_moments(n, m, d);
  p.source = MomentSource::SrhtTraceAsymptotic;
  return p;
}

/// Closed-form moments for a sketch kind acting on n rows. For the SRHT the
/// padded size is used.
inline MomentPair closed_form_moments(SketchKind kind, Index n, Index m, Index d) {
  switch (kind) {
    case SketchKind::Gaussian: return gaussian_moments(m, d);
    case SketchKind::Haar: return haar_moments(n, m, d);
    case SketchKind::SRHT: return srht_trace_moments(effective_dimension(kind, n), m, d);
  }
  throw DomainError("closed_form_moments: unknown kind");
}

/// Monte-Carlo estimate of theta1, theta2 for the given orthonormal U.
///
/// Each trial draws S with seed derive_seed(seed, trial). Draws whose C_S is
/// numerically singular are skipped and counted; more than 1% aborts.
inline MomentPair mc_moments(SketchKind kind, const Matrix& u, Index m, std::size_t trials, std::uint64_t seed,
                             unsigned jobs = 1) {
  const Index n = u.rows();
  const Index d = u.cols();
  if (trials < 2) throw DomainError("mc_moments: need at least 2 trials");
  if (m <= d) throw DomainError("mc_moments: need m > d");

  struct Sample {
    double t1 = 0, t2 = 0;
    bool ok = false;
  };
  const auto samples = run_trials<Sample>(trials, jobs, [&](std::size_t trial) {
    const SketchOperator s = draw(kind, m, n, derive_seed(seed, trial));
    const Matrix su = apply(s, u);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(su.transpose() * su, Eigen::EigenvaluesOnly);
    const Vector& lam = eig.eigenvalues();
    Sample out;
    if (!(lam(0) > kRankTol * lam(d - 1))) return out;
    out.t1 = lam.cwiseInverse().sum() / static_cast<double>(d);
    out.t2 = lam.cwiseInverse().cwiseAbs2().sum() / static_cast<double>(d);
    out.ok = true;
    return out;
  });

  std::size_t failures = 0;
  double s1 = 0, s2 = 0;
  for (const auto& s : samples) {
    if (!s.ok) { ++failures; continue; }
    s1 += s.t1;
    s2 += s.t2;
  }
  if (static_cast<double>(failures) > 0.01 * static_cast<double>(trials))
    throw NumericalError("mc_moments: " + std::to_string(failures) + " of " + std::to_string(trials) +
                         " sketches gave a singular C_S");
  const double k = static_cast<double>(trials - failures);
  const double mean1 = s1 / k;
  const double mean2 = s2 / k;
  double v1 = 0, v2 = 0;
  for (const auto& s : samples) {
    if (!s.ok) continue;
    v1 += (s.t1 - mean1) * (s.t1 - mean1);
    v2 += (s.t2 - mean2) * (s.t2 - mean2);
  }
  MomentPair p;
  p.theta1 = mean1;
  p.theta2 = mean2;
  p.source = MomentSource::MonteCarlo;
  p.std_errors = std::make_pair(std::sqrt(v1 / (k - 1.0) / k), std::sqrt(v2 / (k - 1.0) / k));
  p.failures = failures;
  return p;
}

/// Same, with U a random orthonormal n x d basis drawn from `seed`.
inline MomentPair mc_moments(SketchKind kind, Index n, Index m, Index d, std::size_t trials, std::uint64_t seed,
                             unsigned jobs = 1) {
  Rng rng = make_rng(derive_seed(seed, ~std::uint64_t{0}));
  const Matrix u = haar_orthonormal(n, d, rng);
  return mc_moments(kind, u, m, trials, seed, jobs);
}

}  // namespace sketchsolve
