#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sketchsolve/common.hpp"

namespace sketchsolve {

/// Parameters of the expected-error dynamics of Polyak-IHS with refreshed
/// sketches, and the coefficients of its characteristic cubic
/// chi(lambda) = lambda^3 + a2 lambda^2 + a1 lambda + a0.
struct DynamicsParams {
  double mu = 0, beta = 0, theta1 = 1, theta2 = 1;
  double eta = 0, gamma = 0, eta0 = 0, gamma0 = 0;
  double a0 = 0, a1 = 0, a2 = 0;
  double rho_star = 0, alpha = 0;

  static DynamicsParams make(double mu, double beta, double theta1, double theta2) {
    if (!(beta >= 0.0)) throw DomainError("DynamicsParams: need beta >= 0");
    return extended(mu, beta, theta1, theta2);
  }

  /// Same without the beta >= 0 restriction, for derivative probes.
  static DynamicsParams extended(double mu, double beta, double theta1, double theta2) {
    if (!(theta1 > 0.0) || !(theta2 >= theta1 * theta1))
      throw DomainError("DynamicsParams: need theta1 > 0 and theta2 >= theta1^2");
    DynamicsParams p;
    p.mu = mu;
    p.beta = beta;
    p.theta1 = theta1;
    p.theta2 = theta2;
    p.eta = (1 + beta) * (1 + beta) - 2 * mu * theta1 * (1 + beta) + mu * mu * theta2;
    p.gamma = 1 + beta - mu * theta1;
    p.eta0 = 1 - 2 * mu * theta1 + mu * mu * theta2;
    p.gamma0 = 1 - mu * theta1;
    p.a0 = -beta * beta * beta;
    p.a1 = beta * (beta * beta - (1 - 2 * p.gamma0) * beta + 2 * p.gamma0 * p.gamma0 - p.eta0);
    p.a2 = -beta * beta + (1 - 2 * p.gamma0) * beta - p.eta0;
    p.rho_star = 1 - theta1 * theta1 / theta2;
    p.alpha = theta2 / theta1 * mu;
    return p;
  }

  double chi(double lambda) const { return ((lambda + a2) * lambda + a1) * lambda + a0; }
};

/// Linear map of (E<Delta_{t+1}, Delta_{t+1}>, E<Delta_{t+1}, Delta_t>,
/// E<Delta_t, Delta_t>) one step forward.
inline Eigen::Matrix3d dynamics_matrix(const DynamicsParams& p) {
  Eigen::Matrix3d m;
  m << p.eta, 2 * p.gamma, 1,
       -p.beta * p.gamma, -p.beta, 0,
       p.beta * p.beta, 0, 0;
  return m;
}

inline Eigen::Vector3cd cubic_roots(const DynamicsParams& p) {
  Eigen::Matrix3d companion;
  companion << -p.a2, -p.a1, -p.a0,
               1, 0, 0,
               0, 1, 0;
  Eigen::EigenSolver<Eigen::Matrix3d> eig(companion, false);
  return eig.eigenvalues();
}

/// Largest modulus among the roots of chi.
inline double root_radius(const DynamicsParams& p) { return cubic_roots(p).cwiseAbs().maxCoeff(); }

/// Real part of the root of chi closest to `near`; follows one root branch.
inline double root_branch(const DynamicsParams& p, double near) {
  const Eigen::Vector3cd roots = cubic_roots(p);
  Index best = 0;
  for (Index i = 1; i < 3; ++i)
    if (std::abs(roots(i) - near) < std::abs(roots(best) - near)) best = i;
  return roots(best).real();
}

struct RootRadiusSearch {
  double min_value = 0;
  double mu = 0;
  double beta = 0;
  double mu_step = 0;    // grid spacing
  double beta_step = 0;  // grid spacing
};

struct RootRadiusGrid {
  double mu_max = -1;    // default 3 theta1/theta2
  double beta_max = 1;   // beta ranges over [0, beta_max)
  int mu_points = 121;
  int beta_points = 100;
};

/// Grid minimum of the root radius over [0, mu_max] x [0, beta_max) followed
/// by a coordinate-descent polish with step halving down to 1e-10.
inline RootRadiusSearch min_root_radius_search(double theta1, double theta2, RootRadiusGrid grid = {}) {
  const double mu_max = grid.mu_max > 0 ? grid.mu_max : 3.0 * theta1 / theta2;
  if (grid.mu_points < 2 || grid.beta_points < 1) throw DomainError("min_root_radius_search: grid too small");
  auto eval = [&](double mu, double beta) { return root_radius(DynamicsParams::make(mu, beta, theta1, theta2)); };

  RootRadiusSearch best;
  best.mu_step = mu_max / (grid.mu_points - 1);
  best.beta_step = grid.beta_max / grid.beta_points;
  best.min_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid.mu_points; ++i) {
    for (int j = 0; j < grid.beta_points; ++j) {
      const double mu = best.mu_step * i;
      const double beta = best.beta_step * j;
      const double v = eval(mu, beta);
      if (v < best.min_value) best = {v, mu, beta, best.mu_step, best.beta_step};
    }
  }

  double hm = best.mu_step;
  double hb = best.beta_step;
  while (hm > 1e-10 || hb > 1e-10) {
    bool moved = false;
    for (const auto& [dm, db] : {std::pair{hm, 0.0}, std::pair{-hm, 0.0}, std::pair{0.0, hb}, std::pair{0.0, -hb}}) {
      const double mu = best.mu + dm;
      const double beta = std::clamp(best.beta + db, 0.0, grid.beta_max);
      if (mu == best.mu && beta == best.beta) continue;
      const double v = eval(mu, beta);
      if (v < best.min_value) {
        best.min_value = v;
        best.mu = mu;
        best.beta = beta;
        moved = true;
      }
    }
    if (!moved) {
      hm *= 0.5;
      hb *= 0.5;
    }
  }
  return best;
}

/// P_alpha(beta) = -beta^3 + rho (1-2 alpha) beta^2
///                 + rho (1-alpha)(1 + alpha (2 rho - 1)) beta - rho^2 (1-alpha)^2.
inline double p_alpha(double alpha, double beta, double rho_star) {
  const double r = rho_star;
  return -beta * beta * beta + r * (1 - 2 * alpha) * beta * beta +
         r * (1 - alpha) * (1 + alpha * (2 * r - 1)) * beta - r * r * (1 - alpha) * (1 - alpha);
}

/// chi evaluated at lambda in the (alpha, beta) parameterization. Only the
/// ratio theta1^2/theta2 = 1 - rho_star matters, so theta1 = 1 is used.
inline double chi_alpha_beta(double alpha, double beta, double rho_star, double lambda) {
  if (!(rho_star < 1.0)) throw DomainError("chi_alpha_beta: need rho_star < 1");
  const double theta2 = 1.0 / (1.0 - rho_star);
  return DynamicsParams::extended(alpha / theta2, beta, 1.0, theta2).chi(lambda);
}

/// chi_{alpha,beta}(rho*) / (1 - rho*), which equals P_alpha(beta).
inline double p_alpha_via_chi(double alpha, double beta, double rho_star) {
  if (rho_star == 1.0) throw DomainError("p_alpha_via_chi: undefined at rho_star = 1");
  return chi_alpha_beta(alpha, beta, rho_star, rho_star) / (1.0 - rho_star);
}

/// Largest critical point of P_alpha: (b + sqrt(b^2 + 3c)) / 3.
inline double beta_plus(double alpha, double rho_star) {
  if (!(rho_star > 0.0 && rho_star < 1.0)) throw DomainError("beta_plus: need 0 < rho_star < 1");
  const double b = rho_star * (1 - 2 * alpha);
  const double c = rho_star * (1 - alpha) * (1 + alpha * (2 * rho_star - 1));
  const double disc = b * b + 3 * c;
  if (!(disc > 0.0)) throw std::logic_error("beta_plus: non-positive discriminant");
  return (b + std::sqrt(disc)) / 3.0;
}

/// Spectral radius of the fixed-sketch heavy-ball iteration matrix, given
/// the eigenvalues of C_S. Each eigenvalue contributes the 2x2 block
/// [[1 + beta - mu/lambda, -beta], [1, 0]].
inline double fixed_polyak_spectral_radius(const Vector& lambdas, double mu, double beta) {
  double radius = 0.0;
  for (Index i = 0; i < lambdas.size(); ++i) {
    const double lam = lambdas(i);
    if (!(lam > 0.0)) throw DomainError("fixed_polyak_spectral_radius: eigenvalues must be positive");
    const double trace = 1 + beta - mu / lam;
    const double disc = trace * trace - 4 * beta;
    double r;
    if (disc >= 0.0) {
      r = 0.5 * (std::abs(trace) + std::sqrt(disc));
    } else {
      r = std::sqrt(beta);
    }
    radius = std::max(radius, r);
  }
  return radius;
}

/// Marchenko-Pastur law with ratio rho and unit scale.
struct MpSpec {
  double rho = 0.5;
  double lambda_minus = 0, lambda_plus = 0;
  double a = 0, b = 0, kappa = 0;

  static MpSpec make(double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError("MpSpec: need 0 < rho < 1");
    MpSpec s;
    s.rho = rho;
    s.lambda_minus = (1 - std::sqrt(rho)) * (1 - std::sqrt(rho));
    s.lambda_plus = (1 + std::sqrt(rho)) * (1 + std::sqrt(rho));
    s.a = 1 / s.lambda_plus;
    s.b = 1 / s.lambda_minus;
    s.kappa = (s.b + s.a) / (s.b - s.a);
    return s;
  }

  double density(double lambda) const {
    if (lambda <= lambda_minus || lambda >= lambda_plus) return 0.0;
    return std::sqrt((lambda_plus - lambda) * (lambda - lambda_minus)) / (2 * std::numbers::pi * rho * lambda);
  }
};

/// ln Gamma_t(mu), Gamma_t(mu) = E (1 - mu/lambda)^{2t} over the law.
///
/// The integrand is rescaled by its supremum so large t does not overflow,
/// and lambda = lambda_- + (lambda_+ - lambda_-) sin^2(phi) removes the
/// square-root endpoint behaviour of the density.
inline double mp_log_gamma(double rho, double mu, int t, double rel_tol = 1e-10) {
  if (t < 0) throw DomainError("mp_gamma: need t >= 0");
  const MpSpec s = MpSpec::make(rho);
  const double scale = std::max(std::abs(1 - mu / s.lambda_minus), std::abs(1 - mu / s.lambda_plus));
  const double width = s.lambda_plus - s.lambda_minus;
  const double unit = scale > 0 ? scale : 1.0;
  auto integrand = [&](double phi) {
    const double sp = std::sin(phi);
    const double lambda = s.lambda_minus + width * sp * sp;
    const double s2 = std::sin(2 * phi);
    const double weight = width * width * s2 * s2 / (4 * std::numbers::pi * rho * lambda);
    return std::pow((1 - mu / lambda) / unit, 2 * t) * weight;
  };
  double error = 0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, 0.0, std::numbers::pi / 2, 25, rel_tol, &error);
  if (!std::isfinite(value) || !(value > 0.0) || error > 100 * rel_tol * value)
    throw NumericalError("mp_gamma: quadrature did not converge");
  return 2.0 * t * std::log(unit) + std::log(value);
}

inline double mp_gamma(double rho, double mu, int t) { return std::exp(mp_log_gamma(rho, mu, t)); }

/// Asymptotic fixed-sketch rate 4 rho / (1 + rho)^2.
inline double mp_asymptotic_rate(double rho) { return 4 * rho / ((1 + rho) * (1 + rho)); }

/// Step minimizing Gamma_t for large t: (1 - rho)^2 / (1 + rho).
inline double mp_optimal_step(double rho) { return (1 - rho) * (1 - rho) / (1 + rho); }

struct MpStepReport {
  double rho = 0;
  int t = 0;
  std::vector<double> mu;
  std::vector<double> log_gamma;
  double mu_star = 0;
  double argmin_mu = 0;
  double grid_step = 0;
  double log_ratio_low_edge = 0;   // ln Gamma_t(mu_min) - ln Gamma_t(mu*)
  double log_ratio_high_edge = 0;  // ln Gamma_t(mu_max) - ln Gamma_t(mu*)
  bool degenerate = false;         // t = 0: Gamma is identically 1
};

/// Gamma_t on a uniform mu-grid over [lambda_-, lambda_+].
inline MpStepReport mp_optimal_step_check(double rho, int t, int points = 101) {
  if (points < 2) throw DomainError("mp_optimal_step_check: need at least 2 points");
  const MpSpec s = MpSpec::make(rho);
  MpStepReport rep;
  rep.rho = rho;
  rep.t = t;
  rep.mu_star = mp_optimal_step(rho);
  rep.grid_step = (s.lambda_plus - s.lambda_minus) / (points - 1);
  rep.degenerate = t == 0;
  std::size_t best = 0;
  for (int i = 0; i < points; ++i) {
    const double mu = s.lambda_minus + rep.grid_step * i;
    rep.mu.push_back(mu);
    rep.log_gamma.push_back(mp_log_gamma(rho, mu, t));
    if (rep.log_gamma.back() < rep.log_gamma[best]) best = rep.log_gamma.size() - 1;
  }
  rep.argmin_mu = rep.mu[best];
  const double ref = mp_log_gamma(rho, rep.mu_star, t);
  rep.log_ratio_low_edge = rep.log_gamma.front() - ref;
  rep.log_ratio_high_edge = rep.log_gamma.back() - ref;
  return rep;
}

/// Expected delta_0..delta_T of Polyak-IHS with refreshed sketches, started
/// from x_{-1} = x_0 with delta_0 = delta0.
inline std::vector<double> expected_polyak_errors(const DynamicsParams& p, double delta0, int steps) {
  const Eigen::Matrix3d m = dynamics_matrix(p);
  Eigen::Vector3d x(p.eta0, -p.beta * p.gamma0, p.beta * p.beta);
  x *= delta0;
  std::vector<double> out{delta0};
  for (int t = 0; t < steps; ++t) {
    out.push_back(x(0));
    x = m * x;
  }
  return out;
}

/// Empirical growth rate (|M^T X0| / |X0|)^{1/T} of the expected-error
/// dynamics, with X0 along the dominant eigenvector.
inline double momentum_growth_rate(const DynamicsParams& p, int steps) {
  if (steps < 1) throw DomainError("momentum_growth_rate: need steps >= 1");
  const Eigen::Matrix3d m = dynamics_matrix(p);
  Eigen::EigenSolver<Eigen::Matrix3d> eig(m);
  Index k = 0;
  eig.eigenvalues().cwiseAbs().maxCoeff(&k);
  Eigen::Vector3d x = eig.eigenvectors().col(k).real();
  if (x.norm() == 0.0) x = eig.eigenvectors().col(k).imag();
  const double x0 = x.norm();
  double log_growth = 0.0;
  for (int t = 0; t < steps; ++t) {
    x = m * x;
    const double nx = x.norm();
    if (nx == 0.0) return 0.0;
    log_growth += std::log(nx);
    x /= nx;
  }
  return std::exp((log_growth - std::log(x0)) / steps);
}

}  // namespace sketchsolve
