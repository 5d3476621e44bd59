#include <gtest/gtest.h>

#include <cmath>

#include "sketchsolve/analysis.hpp"
#include "sketchsolve/solvers.hpp"

using namespace sketchsolve;

namespace {

SolverConfig base_config(Index m, std::uint64_t seed) {
  SolverConfig c;
  c.m = m;
  c.seed = seed;
  c.max_iters = 10;
  return c;
}

// Textbook IHS with H_S^{-1} applied through a Cholesky factor.
std::vector<Vector> reference_ihs(const LeastSquaresProblem& p, SketchKind kind, Index m, std::uint64_t seed,
                                  bool refreshed, double mu, double beta, int iters) {
  std::vector<Vector> xs{Vector::Zero(p.d())};
  Vector prev = xs[0];
  for (int t = 0; t < iters; ++t) {
    const std::uint64_t s = refreshed ? derive_seed(seed, static_cast<std::uint64_t>(t)) : seed;
    const Matrix sa = draw(kind, m, p.n(), s).dense() * p.A;
    const Matrix hs = sa.transpose() * sa;
    const Vector& x = xs.back();
    const Vector g = p.A.transpose() * (p.A * x) - p.b;
    Vector next = x - mu * hs.llt().solve(g) + beta * (x - prev);
    prev = x;
    xs.push_back(next);
  }
  return xs;
}

// Minimizer of the H-norm error over x0 + K_t(H_S^{-1} H, H_S^{-1} b), x0 = 0.
Vector krylov_minimizer(const LeastSquaresProblem& p, const Matrix& hs, int t) {
  const Matrix h = p.A.transpose() * p.A;
  const auto hs_llt = hs.llt();
  Matrix basis(p.d(), t);
  Vector v = hs_llt.solve(p.b);
  for (int j = 0; j < t; ++j) {
    basis.col(j) = v / v.norm();
    v = hs_llt.solve(h * basis.col(j));
  }
  Eigen::HouseholderQR<Matrix> qr(basis);
  const Matrix q = qr.householderQ() * Matrix::Identity(p.d(), t);
  const Vector c = (q.transpose() * h * q).ldlt().solve(q.transpose() * p.b);
  return q * c;
}

}  // namespace

TEST(Solvers, IhsMatchesReferenceFixedAndRefreshed) {
  const auto p = generate_synthetic(200, 6, 30, 1);
  for (bool refreshed : {false, true}) {
    auto cfg = base_config(24, 7);
    cfg.mode = refreshed ? SketchMode::Refreshed : SketchMode::Fixed;
    cfg.mu = 0.4;
    cfg.max_iters = 6;
    cfg.keep_iterates = true;
    const auto tr = ihs(p, cfg);
    const auto ref = reference_ihs(p, SketchKind::Gaussian, 24, 7, refreshed, 0.4, 0.0, 6);
    ASSERT_EQ(tr.iterates.size(), ref.size());
    for (std::size_t t = 0; t < ref.size(); ++t)
      EXPECT_LE((tr.iterates[t] - ref[t]).norm(), 1e-9 * (1 + ref[t].norm())) << "t=" << t;
  }
}

TEST(Solvers, PolyakMatchesReference) {
  const auto p = generate_synthetic(200, 6, 30, 2);
  auto cfg = base_config(24, 8);
  cfg.mode = SketchMode::Refreshed;
  cfg.mu = 0.3;
  cfg.beta = 0.2;
  cfg.max_iters = 6;
  cfg.keep_iterates = true;
  const auto tr = polyak_ihs(p, cfg);
  const auto ref = reference_ihs(p, SketchKind::Gaussian, 24, 8, true, 0.3, 0.2, 6);
  for (std::size_t t = 0; t < ref.size(); ++t)
    EXPECT_LE((tr.iterates[t] - ref[t]).norm(), 1e-9 * (1 + ref[t].norm())) << "t=" << t;
}

TEST(Solvers, PolyakWithZeroMomentumIsIhsBitwise) {
  const auto p = generate_synthetic(150, 5, 10, 3);
  auto cfg = base_config(20, 4);
  cfg.mode = SketchMode::Refreshed;
  cfg.beta = 0.0;
  const auto o = compute_oracle(p);
  const auto a = ihs(p, cfg, &o);
  const auto b = polyak_ihs(p, cfg, &o);
  EXPECT_EQ(a.deltas, b.deltas);
  EXPECT_TRUE(a.x == b.x);
}

TEST(Solvers, PcgMatchesKrylovMinimizer) {
  const auto p = generate_synthetic(300, 8, 1e3, 4);
  const auto o = compute_oracle(p);
  auto cfg = base_config(40, 5);
  cfg.max_iters = 4;
  cfg.keep_iterates = true;
  const auto tr = pcg(p, cfg, &o);
  const Matrix sa = apply(draw(SketchKind::Gaussian, 40, 300, 5), p.A);
  const Matrix hs = sa.transpose() * sa;
  for (int t = 1; t <= 4; ++t) {
    const Vector xk = krylov_minimizer(p, hs, t);
    EXPECT_NEAR(tr.deltas[static_cast<std::size_t>(t)], error_delta(o, xk), 1e-8 * tr.deltas[0]) << "t=" << t;
  }
}

TEST(Solvers, PcgSolvesInAtMostDStepsUpToRounding) {
  const auto p = generate_synthetic(256, 10, 100, 5);
  const auto o = compute_oracle(p);
  auto cfg = base_config(40, 1);
  cfg.max_iters = 12;
  const auto tr = pcg(p, cfg, &o);
  EXPECT_LE(tr.relative_deltas()[10], 1e-20);
}

TEST(Solvers, PcgBeatsHeavyBallOnSameSketch) {
  const auto p = generate_synthetic(512, 10, 100, 6);
  const auto o = compute_oracle(p);
  auto cfg = base_config(60, 2);
  const auto a = pcg(p, cfg, &o);
  const auto b = ihs(p, cfg, &o);
  const auto c = polyak_ihs(p, cfg, &o);
  for (std::size_t t = 0; t < a.deltas.size(); ++t) {
    EXPECT_LE(a.deltas[t], b.deltas[t] + 1e-10 * a.deltas[0]);
    EXPECT_LE(a.deltas[t], c.deltas[t] + 1e-10 * a.deltas[0]);
  }
}

TEST(Solvers, ExactPreconditionerConvergesInOneIhsStep) {
  const auto p = generate_synthetic(60, 5, 50, 7);
  const auto o = compute_oracle(p);
  const auto f = factorize(p.A);
  auto cfg = base_config(60, 0);
  cfg.mu = 1.0;
  cfg.max_iters = 1;
  const auto tr = ihs(p, f, cfg, &o);
  EXPECT_LE(tr.relative_deltas()[1], 1e-24);
}

TEST(Solvers, GccWithFixedSketchMatchesPcg) {
  const auto p = generate_synthetic(300, 8, 100, 8);
  const auto o = compute_oracle(p);
  auto cfg = base_config(40, 9);
  cfg.max_iters = 5;
  cfg.truncation = Truncation::Full;
  const auto a = pcg(p, cfg, &o);
  const auto b = fcg(p, cfg, &o);
  EXPECT_EQ(b.method, "gcc");
  for (std::size_t t = 0; t < a.deltas.size(); ++t)
    EXPECT_NEAR(a.deltas[t], b.deltas[t], 1e-9 * a.deltas[0]) << "t=" << t;
}

TEST(Solvers, GccDirectionsAreHessianOrthogonal) {
  const auto p = generate_synthetic(300, 8, 10, 9);
  auto cfg = base_config(30, 10);
  cfg.mode = SketchMode::Refreshed;
  cfg.truncation = Truncation::Full;
  cfg.max_iters = 6;
  cfg.keep_iterates = true;
  const auto tr = fcg(p, cfg);
  const Matrix h = p.A.transpose() * p.A;
  ASSERT_EQ(tr.directions.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      const double scale = std::sqrt(tr.directions[i].dot(h * tr.directions[i]) * tr.directions[j].dot(h * tr.directions[j]));
      EXPECT_LE(std::abs(tr.directions[i].dot(h * tr.directions[j])), 1e-9 * scale);
    }
}

TEST(Solvers, TruncationVariants) {
  const auto p = generate_synthetic(300, 8, 10, 10);
  const auto o = compute_oracle(p);
  auto cfg = base_config(30, 11);
  cfg.mode = SketchMode::Refreshed;
  cfg.max_iters = 8;
  cfg.truncation = Truncation::Full;
  const auto full = fcg(p, cfg, &o);
  cfg.truncation = Truncation::Fixed;
  cfg.k = 50;
  const auto wide = fcg(p, cfg, &o);
  EXPECT_EQ(wide.method, "fcg(50)");
  for (std::size_t t = 0; t < full.deltas.size(); ++t) EXPECT_NEAR(full.deltas[t], wide.deltas[t], 1e-12 * full.deltas[0]);

  cfg.truncation = Truncation::One;
  const auto one = fcg(p, cfg, &o);
  cfg.truncation = Truncation::Fixed;
  cfg.k = 1;
  const auto k1 = fcg(p, cfg, &o);
  EXPECT_EQ(one.method, "ipcg");
  EXPECT_EQ(one.deltas, k1.deltas);
}

TEST(Solvers, FlexibleStepsNeverIncreaseError) {
  const auto p = generate_synthetic(300, 8, 100, 11);
  const auto o = compute_oracle(p);
  auto cfg = base_config(30, 12);
  cfg.mode = SketchMode::Refreshed;
  cfg.truncation = Truncation::Fixed;
  cfg.k = 0;
  const auto tr = fcg(p, cfg, &o);
  for (std::size_t t = 1; t < tr.deltas.size(); ++t) EXPECT_LE(tr.deltas[t], tr.deltas[t - 1] * (1 + 1e-12));
}

TEST(Solvers, RefreshedIhsExpectedRate) {
  // E[delta_t] / delta_0 = rho^t for every problem instance.
  const auto p = generate_synthetic(128, 4, 10, 12);
  const auto o = compute_oracle(p);
  const double rho = gaussian_moments(16, 4).rate();
  const int trials = 1500;
  std::vector<double> mean(4, 0.0);
  for (int i = 0; i < trials; ++i) {
    auto cfg = base_config(16, 1000 + static_cast<std::uint64_t>(i));
    cfg.mode = SketchMode::Refreshed;
    cfg.max_iters = 3;
    const auto rel = ihs(p, cfg, &o).relative_deltas();
    for (std::size_t t = 0; t < 4; ++t) mean[t] += rel[t] / trials;
  }
  EXPECT_NEAR(mean[1], rho, 0.05 * rho);
  EXPECT_NEAR(mean[2], rho * rho, 0.1 * rho * rho);
}

TEST(Solvers, RefreshedPolyakMatchesExpectedDynamics) {
  const auto p = generate_synthetic(128, 4, 10, 18);
  const auto o = compute_oracle(p);
  const auto th = gaussian_moments(16, 4);
  const auto dyn = DynamicsParams::make(0.8 * th.optimal_step(), 0.3, th.theta1, th.theta2);
  const int trials = 2000;
  std::vector<double> mean(4, 0.0);
  for (int i = 0; i < trials; ++i) {
    auto cfg = base_config(16, 5000 + static_cast<std::uint64_t>(i));
    cfg.mode = SketchMode::Refreshed;
    cfg.mu = dyn.mu;
    cfg.beta = dyn.beta;
    cfg.max_iters = 3;
    const auto rel = polyak_ihs(p, cfg, &o).relative_deltas();
    for (std::size_t t = 0; t < 4; ++t) mean[t] += rel[t] / trials;
  }
  const auto expected = expected_polyak_errors(dyn, 1.0, 3);
  for (std::size_t t = 1; t < 4; ++t) EXPECT_NEAR(mean[t], expected[t], 0.1 * expected[t]) << "t=" << t;
}

TEST(Solvers, StoppingRules) {
  const auto p = generate_synthetic(256, 8, 100, 13);
  const auto o = compute_oracle(p);
  auto cfg = base_config(64, 3);
  cfg.tol = 1e-6;
  cfg.max_iters = 100;
  const auto tr = pcg(p, cfg, &o);
  EXPECT_EQ(tr.status, SolveStatus::Converged);
  EXPECT_LE(tr.relative_deltas().back(), 1e-6);
  EXPECT_GT(tr.relative_deltas()[tr.deltas.size() - 2], 1e-6);
  EXPECT_EQ(static_cast<std::size_t>(tr.iterations) + 1, tr.deltas.size());

  const auto blind = pcg(p, cfg);
  EXPECT_TRUE(blind.deltas.empty());
  EXPECT_EQ(blind.status, SolveStatus::Converged);
  EXPECT_LE(blind.residuals.back(), 1e-6 * blind.residuals.front());

  cfg.tol = 0.0;
  cfg.max_iters = 3;
  const auto capped = ihs(p, cfg, &o);
  EXPECT_EQ(capped.status, SolveStatus::MaxIterations);
  EXPECT_EQ(capped.iterations, 3);
}

TEST(Solvers, FlopsAccumulatePerPhase) {
  const auto p = generate_synthetic(256, 8, 10, 14);
  auto cfg = base_config(32, 1);
  cfg.max_iters = 5;
  const auto fixed = ihs(p, cfg);
  cfg.mode = SketchMode::Refreshed;
  const auto refreshed = ihs(p, cfg);
  EXPECT_EQ(refreshed.flops.sketch, 5 * fixed.flops.sketch);
  EXPECT_EQ(refreshed.flops.factor, 5 * fixed.flops.factor);
  for (std::size_t t = 1; t < fixed.flops_cum.size(); ++t) EXPECT_GT(fixed.flops_cum[t], fixed.flops_cum[t - 1]);
  EXPECT_EQ(fixed.flops_cum.back(), fixed.flops.total());
}

TEST(Solvers, Deterministic) {
  const auto p = generate_synthetic(256, 8, 10, 15);
  auto cfg = base_config(32, 99);
  cfg.mode = SketchMode::Refreshed;
  cfg.kind = SketchKind::SRHT;
  const auto a = polyak_ihs(p, cfg);
  const auto b = polyak_ihs(p, cfg);
  EXPECT_EQ(a.residuals, b.residuals);
  EXPECT_TRUE(a.x == b.x);
}

TEST(Solvers, ResolveParameters) {
  SolverConfig cfg = base_config(40, 0);
  auto r = resolve_parameters(false, 1000, 10, cfg);
  EXPECT_NEAR(r.mu, 0.75 * 0.75 / 1.25, 1e-15);
  EXPECT_EQ(r.beta, 0.0);
  r = resolve_parameters(true, 1000, 10, cfg);
  EXPECT_NEAR(r.mu, 0.75 * 0.75, 1e-15);
  EXPECT_NEAR(r.beta, 0.25, 1e-15);

  cfg.kind = SketchKind::Haar;
  r = resolve_parameters(true, 1000, 10, cfg);
  EXPECT_NEAR(r.mu, 0.04 * 0.75 * 0.75, 1e-15);
  cfg.kind = SketchKind::SRHT;
  r = resolve_parameters(true, 1000, 10, cfg);
  EXPECT_NEAR(r.mu, 40.0 / 1024.0 * 0.75 * 0.75, 1e-15);

  cfg.kind = SketchKind::Gaussian;
  cfg.mode = SketchMode::Refreshed;
  r = resolve_parameters(true, 1000, 10, cfg);
  EXPECT_NEAR(r.mu, gaussian_moments(40, 10).optimal_step(), 1e-15);
  EXPECT_EQ(r.beta, 0.0);

  cfg.mu = 0.5;
  cfg.beta = 0.1;
  r = resolve_parameters(true, 1000, 10, cfg);
  EXPECT_EQ(r.mu, 0.5);
  EXPECT_EQ(r.beta, 0.1);
  r = resolve_parameters(false, 1000, 10, cfg);
  EXPECT_EQ(r.beta, 0.0);

  cfg.beta = -0.1;
  EXPECT_THROW(resolve_parameters(true, 1000, 10, cfg), DomainError);
}

TEST(Solvers, ConfigurationErrors) {
  const auto p = generate_synthetic(100, 8, 10, 16);
  auto cfg = base_config(6, 0);
  EXPECT_THROW(pcg(p, cfg), DimensionError);
  cfg.m = 20;
  cfg.mode = SketchMode::Refreshed;
  EXPECT_THROW(pcg(p, cfg), DomainError);
  cfg.mode = SketchMode::Fixed;
  cfg.x0 = Vector::Zero(3);
  EXPECT_THROW(ihs(p, cfg), DimensionError);
  cfg.x0.reset();
  cfg.max_iters = 0;
  EXPECT_THROW(fcg(p, cfg), DomainError);
}

TEST(Solvers, WarmStartAtSolutionStaysThere) {
  const auto p = generate_synthetic(100, 5, 10, 17);
  const auto o = compute_oracle(p);
  auto cfg = base_config(20, 0);
  cfg.x0 = o.x_star;
  cfg.max_iters = 3;
  const auto tr = pcg(p, cfg, &o);
  EXPECT_LE(tr.deltas.front(), 1e-24);
  EXPECT_LE(error_delta(o, tr.x), 1e-24);
}
