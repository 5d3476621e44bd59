#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sketchsolve/analysis.hpp"
#include "sketchsolve/moments.hpp"
#include "sketchsolve/rng.hpp"

using namespace sketchsolve;

namespace {

struct RandomTheta {
  double theta1, theta2;
};

RandomTheta random_theta(Rng& rng) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::uniform_real_distribution<double> scale(0.5, 4.0);
  const double rho = u(rng);
  const double theta1 = scale(rng);
  return {theta1, theta1 * theta1 / (1 - rho)};
}

}  // namespace

TEST(Dynamics, ParameterConsistency) {
  Rng rng = make_rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const auto th = random_theta(rng);
    const auto p = DynamicsParams::make(2 * u(rng) * th.theta1 / th.theta2, u(rng), th.theta1, th.theta2);
    EXPECT_NEAR(p.eta, p.eta0 + 2 * p.gamma0 * p.beta + p.beta * p.beta, 1e-14 * std::max(1.0, std::abs(p.eta)));
    EXPECT_NEAR(p.gamma, p.gamma0 + p.beta, 1e-14);
  }
  EXPECT_THROW(DynamicsParams::make(0.1, -0.1, 1, 2), DomainError);
  EXPECT_THROW(DynamicsParams::make(0.1, 0.0, 1, 0.5), DomainError);
}

TEST(Dynamics, CharacteristicPolynomialOfDynamicsMatrix) {
  Rng rng = make_rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const auto th = random_theta(rng);
    const auto p = DynamicsParams::make(2 * u(rng) * th.theta1 / th.theta2, u(rng), th.theta1, th.theta2);
    const Eigen::Matrix3d m = dynamics_matrix(p);
    for (double lambda : {-1.3, -0.2, 0.4, 0.9, 2.0}) {
      const double det = (lambda * Eigen::Matrix3d::Identity() - m).determinant();
      EXPECT_NEAR(det, p.chi(lambda), 1e-12 * std::max(1.0, std::abs(det)));
    }
  }
}

TEST(Dynamics, RootRadiusAtOptimalStepIsRate) {
  for (auto [m, d] : {std::pair<Index, Index>{20, 10}, {40, 10}, {80, 20}}) {
    const auto th = gaussian_moments(m, d);
    const auto p = DynamicsParams::make(th.optimal_step(), 0.0, th.theta1, th.theta2);
    EXPECT_NEAR(root_radius(p), th.rate(), 1e-12);
    EXPECT_NEAR(p.rho_star, th.rate(), 1e-15);
  }
}

TEST(Dynamics, NoMomentumRadiusIsEta0) {
  Rng rng = make_rng(3);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  const auto th = gaussian_moments(30, 10);
  for (int i = 0; i < 20; ++i) {
    const double mu = u(rng) * th.optimal_step();
    const auto p = DynamicsParams::make(mu, 0.0, th.theta1, th.theta2);
    EXPECT_NEAR(root_radius(p), std::abs(1 - 2 * mu * th.theta1 + mu * mu * th.theta2), 1e-12);
  }
}

TEST(Dynamics, RadiusBoundedBelowByMomentum) {
  Rng rng = make_rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const auto th = random_theta(rng);
    const double beta = u(rng);
    const auto p = DynamicsParams::make(3 * u(rng) * th.theta1 / th.theta2, beta, th.theta1, th.theta2);
    EXPECT_GE(root_radius(p), beta - 1e-9);
  }
}

TEST(Dynamics, ExpectedErrorsFollowRecursion) {
  const auto th = gaussian_moments(30, 10);
  const auto p0 = DynamicsParams::make(th.optimal_step(), 0.0, th.theta1, th.theta2);
  const auto e = expected_polyak_errors(p0, 2.0, 5);
  for (int t = 0; t <= 5; ++t) EXPECT_NEAR(e[static_cast<std::size_t>(t)], 2.0 * std::pow(th.rate(), t), 1e-12);

  // Second-moment recursion delta_{t+1} = eta delta_t + 2 gamma c_t + beta^2 delta_{t-1} with
  // c_t = -beta gamma delta_t - beta c_{t-1} computed directly.
  const auto p = DynamicsParams::make(0.3, 0.2, th.theta1, th.theta2);
  const auto f = expected_polyak_errors(p, 1.0, 6);
  double prev = 1.0, cur = p.eta0, c = -p.beta * p.gamma0;
  EXPECT_NEAR(f[1], cur, 1e-14);
  for (std::size_t t = 2; t <= 6; ++t) {
    const double next = p.eta * cur + 2 * p.gamma * c + p.beta * p.beta * prev;
    c = -p.beta * p.gamma * cur - p.beta * c;
    prev = cur;
    cur = next;
    EXPECT_NEAR(f[t], cur, 1e-12);
  }
}

TEST(Dynamics, GrowthRateReachesRootRadius) {
  const auto th = gaussian_moments(20, 10);
  for (double beta : {0.05, 0.1, 0.5}) {
    const auto p = DynamicsParams::make(th.optimal_step(), beta, th.theta1, th.theta2);
    const double lambda = root_radius(p);
    EXPECT_GE(momentum_growth_rate(p, 200), lambda - 1e-6);
    EXPECT_GT(lambda, th.rate());
  }
}

TEST(RootRadiusSearch, GaussianAndHaarThetas) {
  std::vector<MomentPair> thetas{gaussian_moments(20, 10), gaussian_moments(40, 10), gaussian_moments(80, 20),
                                 haar_moments(1024, 20, 10)};
  for (const auto& th : thetas) {
    const auto r = min_root_radius_search(th.theta1, th.theta2);
    EXPECT_GE(r.min_value, th.rate() - 1e-8);
    EXPECT_LE(r.min_value, th.rate() + 1e-4);
    EXPECT_LE(std::abs(r.mu - th.optimal_step()), r.mu_step);
    EXPECT_LE(r.beta, r.beta_step);
  }
}

TEST(RootRadiusSearch, PerfectPreconditionerLimit) {
  const double theta1 = 1.3;
  const double theta2 = theta1 * theta1 / (1 - 1e-12);
  const auto r = min_root_radius_search(theta1, theta2);
  EXPECT_NEAR(r.min_value, 0.0, 1e-6);
}

TEST(RootRadiusSearch, HessianDeterminantAtMinimizer) {
  // Real root branch lambda_1(beta, mu) near (0, theta1/theta2), central differences.
  for (const auto& th : {gaussian_moments(20, 10), gaussian_moments(40, 10), haar_moments(1024, 20, 10)}) {
    const double x = th.theta1 * th.theta1 / th.theta2;
    const double mu0 = th.optimal_step();
    const double h = 1e-4;
    auto f = [&](double beta, double mu) {
      return root_branch(DynamicsParams::extended(mu, beta, th.theta1, th.theta2), th.rate());
    };
    const double hbb = (f(h, mu0) - 2 * f(0, mu0) + f(-h, mu0)) / (h * h);
    const double hmm = (f(0, mu0 + h) - 2 * f(0, mu0) + f(0, mu0 - h)) / (h * h);
    const double hbm = (f(h, mu0 + h) - f(h, mu0 - h) - f(-h, mu0 + h) + f(-h, mu0 - h)) / (4 * h * h);
    const double det = hbb * hmm - hbm * hbm;
    const double expected = 4 * th.theta2 * x * x / (1 - x);
    EXPECT_GT(hbb, 0.0);
    EXPECT_GT(det, 0.0);
    EXPECT_NEAR(det, expected, 0.05 * expected);
  }
}

TEST(PAlpha, TwoRouteIdentity) {
  Rng rng = make_rng(5);
  std::uniform_real_distribution<double> a(-1.0, 3.0), b(0.0, 1.0), r(0.01, 0.99);
  for (int i = 0; i < 100; ++i) {
    const double alpha = a(rng), beta = b(rng), rho = r(rng);
    const double direct = p_alpha(alpha, beta, rho);
    EXPECT_NEAR(p_alpha_via_chi(alpha, beta, rho), direct, 1e-12 * std::max(1.0, std::abs(direct)));
  }
  EXPECT_THROW(p_alpha_via_chi(0.5, 0.5, 1.0), DomainError);
}

TEST(PAlpha, SpecialCases) {
  for (double rho : {0.1, 0.5, 0.8}) {
    for (double beta : {0.0, 0.2, 0.7}) EXPECT_NEAR(p_alpha(1.0, beta, rho), -beta * beta * beta - rho * beta * beta, 1e-15);
    EXPECT_NEAR(p_alpha(0.0, rho, rho), 0.0, 1e-15);
    EXPECT_NEAR(p_alpha(0.0, std::sqrt(rho), rho), 0.0, 1e-15);
    EXPECT_NEAR(p_alpha(0.0, -std::sqrt(rho), rho), 0.0, 1e-15);
  }
}

TEST(PAlpha, BetaPlusIsCriticalPoint) {
  Rng rng = make_rng(6);
  std::uniform_real_distribution<double> a(0.0, 5.0), r(0.01, 0.99);
  for (int i = 0; i < 100; ++i) {
    const double alpha = a(rng), rho = r(rng);
    const double bp = beta_plus(alpha, rho);
    const double h = 1e-6;
    const double fd = (p_alpha(alpha, bp + h, rho) - p_alpha(alpha, bp - h, rho)) / (2 * h);
    const double analytic = -3 * bp * bp + 2 * rho * (1 - 2 * alpha) * bp + rho * (1 - alpha) * (1 + alpha * (2 * rho - 1));
    EXPECT_NEAR(analytic, 0.0, 1e-10 * std::max(1.0, alpha * alpha));
    EXPECT_NEAR(fd, 0.0, 1e-7 * std::max(1.0, alpha * alpha));
  }
  for (double rho : {0.1, 0.5, 0.9}) EXPECT_NEAR(p_alpha(1.0, beta_plus(1.0, rho), rho), 0.0, 1e-12);
  EXPECT_THROW(beta_plus(0.5, 1.0), DomainError);
}

TEST(PAlpha, NoSignChangeBelowRate) {
  for (double rho : {0.1, 0.3, 0.7, 0.9}) {
    for (int i = 0; i < 200; ++i) {
      const double alpha = 5.0 * i / 199.0;
      int sign = 0;
      for (int j = 1; j < 500; ++j) {
        const double v = p_alpha(alpha, rho * j / 500.0, rho);
        const int s = (v > 0) - (v < 0);
        if (sign == 0) sign = s;
        EXPECT_TRUE(s == 0 || s == sign) << "alpha=" << alpha << " rho=" << rho;
      }
    }
  }
}

TEST(FixedPolyak, NoMomentumMatchesOperatorNorm) {
  Rng rng = make_rng(7);
  const Matrix g = standard_normal(30, 6, rng) / std::sqrt(30.0);
  const Matrix c = g.transpose() * g;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(c);
  const double mu = 0.6;
  const Matrix t = Matrix::Identity(6, 6) - mu * c.inverse();
  Eigen::JacobiSVD<Matrix> svd(t);
  EXPECT_NEAR(fixed_polyak_spectral_radius(eig.eigenvalues(), mu, 0.0), svd.singularValues()(0), 1e-12);
}

TEST(FixedPolyak, Basics) {
  EXPECT_NEAR(fixed_polyak_spectral_radius(Vector::Ones(5), 1.0, 0.0), 0.0, 1e-15);
  Vector lam(3);
  lam << 0.5, 1.0, 2.0;
  EXPECT_NEAR(fixed_polyak_spectral_radius(lam, 0.8, 0.0), 0.6, 1e-15);
  lam(1) = 0.0;
  EXPECT_THROW(fixed_polyak_spectral_radius(lam, 0.8, 0.0), DomainError);
}

TEST(FixedPolyak, MarchenkoPasturBound) {
  for (double rho : {0.1, 0.25, 0.5}) {
    const auto s = MpSpec::make(rho);
    Vector lam(200);
    for (Index i = 0; i < 200; ++i) lam(i) = s.lambda_minus + (s.lambda_plus - s.lambda_minus) * i / 199.0;
    EXPECT_LE(fixed_polyak_spectral_radius(lam, (1 - rho) * (1 - rho), rho), std::sqrt(rho) + 1e-7);  // double root: eigenvalues accurate to ~sqrt(eps)
  }
}

TEST(MarchenkoPastur, Normalization) {
  for (double rho : {0.1, 0.25, 0.6}) {
    EXPECT_NEAR(mp_gamma(rho, 0.45, 0), 1.0, 1e-10);
    EXPECT_NEAR(mp_gamma(rho, 0.0, 7), 1.0, 1e-10);
  }
  const auto s = MpSpec::make(0.25);
  EXPECT_NEAR(s.lambda_minus, 0.25, 1e-15);
  EXPECT_NEAR(s.lambda_plus, 2.25, 1e-15);
  EXPECT_NEAR(s.kappa, (4.0 + 1 / 2.25) / (4.0 - 1 / 2.25), 1e-14);
  EXPECT_THROW(MpSpec::make(1.0), DomainError);
}

TEST(MarchenkoPastur, LowOrderMomentsClosedForm) {
  // Gamma_1(mu) = 1 - 2 mu E[1/lambda] + mu^2 E[1/lambda^2] with
  // E[1/lambda] = 1/(1-rho) and E[1/lambda^2] = 1/(1-rho)^3.
  const double rho = 0.25, mu = 0.45;
  const double expected = 1 - 2 * mu / (1 - rho) + mu * mu / std::pow(1 - rho, 3);
  EXPECT_NEAR(mp_gamma(rho, mu, 1), expected, 1e-12);
}

TEST(MarchenkoPastur, AsymptoticRate) {
  const double rho = 0.25;
  const double mu = mp_optimal_step(rho);
  EXPECT_NEAR(mu, 0.45, 1e-15);
  const double ratio = std::exp(mp_log_gamma(rho, mu, 401) - mp_log_gamma(rho, mu, 400));
  EXPECT_NEAR(ratio, mp_asymptotic_rate(rho), 0.02 * mp_asymptotic_rate(rho));
}

TEST(MarchenkoPastur, OptimalStepCheck) {
  const auto rep = mp_optimal_step_check(0.25, 200);
  EXPECT_LE(std::abs(rep.argmin_mu - 0.45), rep.grid_step + 1e-12);
  EXPECT_GT(rep.log_ratio_low_edge, 0.0);
  EXPECT_GT(rep.log_ratio_high_edge, 0.0);
  EXPECT_FALSE(rep.degenerate);
  for (double dmu : {-0.1, 0.1})
    EXPECT_GT(mp_log_gamma(0.25, 0.45 + dmu, 200) - mp_log_gamma(0.25, 0.45, 200), std::log(10.0));
  const auto flat = mp_optimal_step_check(0.25, 0);
  EXPECT_TRUE(flat.degenerate);
  for (double v : flat.log_gamma) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(MarchenkoPastur, MatchesWishartSpectra) {
  // Eigenvalues of W = B B^T / m with B the bidiagonal Laguerre model of a
  // 1000 x 4000 Gaussian matrix; 300 draws give 3 * 10^5 samples.
  const double rho = 0.25, mu = 0.45;
  const Index d = 1000, m = 4000;
  Rng rng = make_rng(8);
  std::vector<double> sum(6, 0.0), sumsq(6, 0.0);
  std::size_t count = 0;
  for (int draw_index = 0; draw_index < 300; ++draw_index) {
    Vector a(d), b(d - 1);
    for (Index i = 0; i < d; ++i) a(i) = std::sqrt(std::chi_squared_distribution<double>(static_cast<double>(m - i))(rng));
    for (Index i = 0; i < d - 1; ++i)
      b(i) = std::sqrt(std::chi_squared_distribution<double>(static_cast<double>(d - 1 - i))(rng));
    Vector diag = a.cwiseAbs2();
    diag.tail(d - 1) += b.cwiseAbs2();
    const Vector off = a.head(d - 1).cwiseProduct(b);
    Eigen::SelfAdjointEigenSolver<Matrix> eig;
    eig.computeFromTridiagonal(diag / m, off / m, Eigen::EigenvaluesOnly);
    for (Index i = 0; i < d; ++i) {
      const double base = 1 - mu / eig.eigenvalues()(i);
      double v = 1.0;
      for (int t = 0; t <= 5; ++t) {
        sum[static_cast<std::size_t>(t)] += v;
        sumsq[static_cast<std::size_t>(t)] += v * v;
        v *= base * base;
      }
    }
    count += static_cast<std::size_t>(d);
  }
  for (int t = 1; t <= 5; ++t) {
    const double mean = sum[static_cast<std::size_t>(t)] / count;
    const double var = sumsq[static_cast<std::size_t>(t)] / count - mean * mean;
    const double se = std::sqrt(var / count);
    EXPECT_NEAR(mp_gamma(rho, mu, t), mean, 3 * se) << "t=" << t;
  }
}

TEST(MarchenkoPastur, OffOptimalStepsDiverge) {
  const double rho = 0.25, mu = mp_optimal_step(rho);
  const double ref = mp_log_gamma(rho, mu, 200);
  for (double shift : {-0.1, 0.1}) EXPECT_GT(mp_log_gamma(rho, mu + shift, 200) - ref, std::log(10.0)) << shift;
}
