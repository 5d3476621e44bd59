#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sketchsolve/common.hpp"
#include "sketchsolve/moments.hpp"
#include "sketchsolve/precond.hpp"
#include "sketchsolve/problem.hpp"
#include "sketchsolve/rng.hpp"
#include "sketchsolve/sketch.hpp"

namespace sketchsolve {

enum class SketchMode { Fixed, Refreshed };

/// Orthogonalization memory of the flexible CG family: all past directions
/// (GCC), the last k (FCG), or the last one (IPCG).
enum class Truncation { Full, Fixed, One };

inline std::string_view to_string(SketchMode m) { return m == SketchMode::Fixed ? "fixed" : "refreshed"; }

inline std::string_view to_string(Truncation t) {
  switch (t) {
    case Truncation::Full: return "full";
    case Truncation::Fixed: return "fixed";
    case Truncation::One: return "one";
  }
  return "unknown";
}

struct SolverConfig {
  int max_iters = 50;
  /// Stop once delta_t <= tol * delta_0 (with an oracle), otherwise once
  /// ||r_t|| <= tol * ||r_0||. Zero runs all max_iters iterations.
  double tol = 0.0;
  std::optional<double> mu;    // step size; empty resolves automatically
  std::optional<double> beta;  // momentum; empty resolves automatically
  Truncation truncation = Truncation::Full;
  int k = 1;  // memory for Truncation::Fixed
  SketchMode mode = SketchMode::Fixed;
  SketchKind kind = SketchKind::Gaussian;
  Index m = 0;
  std::uint64_t seed = 0;
  FactorMethod factor = FactorMethod::QR;
  std::optional<Vector> x0;  // zero when empty
  bool keep_iterates = false;
};

struct PhaseFlops {
  std::uint64_t sketch = 0;
  std::uint64_t factor = 0;
  std::uint64_t iterate = 0;
  std::uint64_t total() const noexcept { return sketch + factor + iterate; }
};

struct PhaseSeconds {
  double sketch = 0;
  double factor = 0;
  double iterate = 0;
  double total() const noexcept { return sketch + factor + iterate; }
};

enum class SolveStatus { Converged, MaxIterations };

inline std::string_view to_string(SolveStatus s) {
  return s == SolveStatus::Converged ? "converged" : "max_iterations";
}

/// Per-iteration record of a solve. Entry t of the vectors describes x_t.
struct SolveTrace {
  std::string method;
  std::vector<double> deltas;             // delta_t; empty without an oracle
  std::vector<double> residuals;          // ||b - H x_t||
  std::vector<std::uint64_t> flops_cum;   // all phases, up to x_t
  std::vector<double> wall_cum;           // seconds, all phases, up to x_t
  double mu = std::numeric_limits<double>::quiet_NaN();
  double beta = 0.0;
  Truncation truncation = Truncation::Full;
  int k = 0;
  SketchMode mode = SketchMode::Fixed;
  SketchKind kind = SketchKind::Gaussian;
  Index m = 0;
  PhaseFlops flops;
  PhaseSeconds wall;
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  Vector x;
  std::vector<Vector> iterates;    // with keep_iterates
  std::vector<Vector> directions;  // conjugate-direction methods, with keep_iterates

  std::vector<double> relative_deltas() const {
    std::vector<double> out(deltas.size());
    for (std::size_t t = 0; t < deltas.size(); ++t) out[t] = deltas[0] > 0 ? deltas[t] / deltas[0] : 0.0;
    return out;
  }
};

/// Step size and momentum after automatic resolution, with the rule applied.
struct ResolvedParameters {
  double mu = 1.0;
  double beta = 0.0;
  std::string rule;
};

/// Scale of C_S: Gaussian sketches are isotropic, orthonormal-row sketches
/// shrink C_S by m / n.
inline double sketch_scale(SketchKind kind, Index n, Index m) {
  if (kind == SketchKind::Gaussian) return 1.0;
  return static_cast<double>(m) / static_cast<double>(effective_dimension(kind, n));
}

/// Resolves the `auto` step size and momentum for the heavy-ball family.
///
/// Fixed sketch: IHS uses mu = (1-rho)^2/(1+rho), Polyak-IHS uses
/// mu = (1-rho)^2 and beta = rho, with rho = d/m (mu rescaled by m/n for
/// orthonormal-row sketches). Refreshed sketch: mu = theta1/theta2 and
/// beta = 0, the minimizer of the expected-error root radius.
inline ResolvedParameters resolve_parameters(bool momentum, Index n, Index d, const SolverConfig& cfg) {
  ResolvedParameters out;
  if (cfg.m < 1) throw DimensionError("resolve_parameters: sketch size m must be set");
  const double rho = static_cast<double>(d) / static_cast<double>(cfg.m);
  if (cfg.mode == SketchMode::Fixed) {
    const double scale = sketch_scale(cfg.kind, n, cfg.m);
    if (momentum) {
      out.mu = scale * (1.0 - rho) * (1.0 - rho);
      out.beta = rho;
      out.rule = "fixed: mu=(1-rho)^2, beta=rho, rho=d/m";
    } else {
      out.mu = scale * (1.0 - rho) * (1.0 - rho) / (1.0 + rho);
      out.rule = "fixed: mu=(1-rho)^2/(1+rho), rho=d/m";
    }
    if (scale != 1.0) out.rule += ", mu scaled by m/n";
  } else {
    const MomentPair th = closed_form_moments(cfg.kind, n, cfg.m, d);
    out.mu = th.optimal_step();
    out.beta = 0.0;
    out.rule = "refreshed: mu=theta1/theta2 (" + std::string(to_string(th.source)) + "), beta=0";
  }
  if (cfg.mu) out.mu = *cfg.mu;
  if (!momentum) out.beta = 0.0;
  else if (cfg.beta) out.beta = *cfg.beta;
  if (cfg.mu || (momentum && cfg.beta)) out.rule += " (overridden)";
  if (out.beta < 0.0) throw DomainError("resolve_parameters: momentum must be >= 0");
  return out;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Supplies H_{S_t}: one factor for a fixed sketch, a fresh draw per
/// iteration for refreshed sketches.
class PreconditionerSource {
 public:
  PreconditionerSource(const LeastSquaresProblem& p, const SolverConfig& cfg, PhaseFlops& flops, PhaseSeconds& wall)
      : problem_(&p), cfg_(&cfg), flops_(&flops), wall_(&wall) {
    if (cfg.m < p.d())
      throw DimensionError("sketch size m=" + std::to_string(cfg.m) + " is smaller than d=" + std::to_string(p.d()));
    if (cfg.mode == SketchMode::Fixed) current_ = build(cfg.seed);
  }

  PreconditionerSource(const PreconditionerFactor& fixed, PhaseFlops& flops, PhaseSeconds& wall)
      : flops_(&flops), wall_(&wall), current_(fixed) {}

  const PreconditionerFactor& at(int t) {
    if (problem_ && cfg_->mode == SketchMode::Refreshed) current_ = build(derive_seed(cfg_->seed, static_cast<std::uint64_t>(t)));
    return *current_;
  }

 private:
  PreconditionerFactor build(std::uint64_t seed) {
    const Index n = problem_->n();
    const Index d = problem_->d();
    auto start = Clock::now();
    const SketchOperator s = draw(cfg_->kind, cfg_->m, n, seed);
    const Matrix sa = apply(s, problem_->A);
    wall_->sketch += seconds_since(start);
    flops_->sketch += draw_flops(cfg_->kind, cfg_->m, n) + apply_flops(s, d);
    start = Clock::now();
    PreconditionerFactor f = factorize(sa, cfg_->factor);
    wall_->factor += seconds_since(start);
    flops_->factor += f.flops();
    return f;
  }

  const LeastSquaresProblem* problem_ = nullptr;
  const SolverConfig* cfg_ = nullptr;
  PhaseFlops* flops_;
  PhaseSeconds* wall_;
  std::optional<PreconditionerFactor> current_;
};

/// Records per-iterate quantities and evaluates the stopping rule.
class Recorder {
 public:
  Recorder(SolveTrace& trace, const SolverConfig& cfg, const ErrorOracle* oracle)
      : trace_(&trace), cfg_(&cfg), oracle_(oracle) {}

  /// Records x_t; returns true when the stopping rule is met.
  bool record(const Vector& x, double residual) {
    auto& tr = *trace_;
    tr.residuals.push_back(residual);
    tr.flops_cum.push_back(tr.flops.total());
    tr.wall_cum.push_back(tr.wall.total());
    if (cfg_->keep_iterates) tr.iterates.push_back(x);
    if (oracle_) {
      tr.deltas.push_back(error_delta(*oracle_, x));
      return tr.deltas.back() <= cfg_->tol * tr.deltas.front();
    }
    return residual <= cfg_->tol * tr.residuals.front();
  }

 private:
  SolveTrace* trace_;
  const SolverConfig* cfg_;
  const ErrorOracle* oracle_;
};

inline Vector hessian_times(const LeastSquaresProblem& p, const Vector& x) { return p.A.transpose() * (p.A * x); }

inline std::uint64_t matvec_flops(const LeastSquaresProblem& p) { return static_cast<std::uint64_t>(4 * p.n() * p.d()); }

inline Vector initial_point(const LeastSquaresProblem& p, const SolverConfig& cfg) {
  if (!cfg.x0) return Vector::Zero(p.d());
  if (cfg.x0->size() != p.d()) throw DimensionError("x0 has wrong length");
  return *cfg.x0;
}

inline void stamp(SolveTrace& tr, const SolverConfig& cfg, Index m) {
  tr.mode = cfg.mode;
  tr.kind = cfg.kind;
  tr.m = m;
}

inline void run_pcg(const LeastSquaresProblem& p, PreconditionerSource& source, const SolverConfig& cfg,
                          const ErrorOracle* oracle, SolveTrace& tr) {
  if (cfg.max_iters < 1) throw DomainError("pcg: max_iters must be >= 1");
  tr.method = "pcg";
  Recorder rec(tr, cfg, oracle);
  const auto& f = source.at(0);
  const std::uint64_t step_flops = matvec_flops(p) + solve_flops(f) + static_cast<std::uint64_t>(10 * p.d());

  auto start = Clock::now();
  Vector x = initial_point(p, cfg);
  Vector r = p.b - hessian_times(p, x);
  Vector rhat = solve(f, r);
  Vector dir = rhat;
  double rz = r.dot(rhat);
  tr.wall.iterate += seconds_since(start);
  tr.flops.iterate += step_flops;

  bool done = rec.record(x, r.norm());
  int t = 0;
  while (!done && t < cfg.max_iters) {
    if (rz == 0.0) {  // exact solution reached
      done = true;
      break;
    }
    start = Clock::now();
    const Vector hp = hessian_times(p, dir);
    const double curvature = dir.dot(hp);
    if (!(curvature > 0.0)) throw BreakdownError("pcg: non-positive curvature p^T H p", t);
    if (cfg.keep_iterates) tr.directions.push_back(dir);
    const double alpha = rz / curvature;
    x += alpha * dir;
    r -= alpha * hp;
    rhat = solve(f, r);
    const double rz_next = r.dot(rhat);
    dir = rhat + (rz_next / rz) * dir;
    rz = rz_next;
    tr.wall.iterate += seconds_since(start);
    tr.flops.iterate += step_flops;
    ++t;
    done = rec.record(x, r.norm());
  }
  tr.iterations = t;
  tr.status = done ? SolveStatus::Converged : SolveStatus::MaxIterations;
  tr.x = std::move(x);
  return;
}

/// Heavy-ball iteration x+ = x - mu H_S^{-1} grad f(x) + beta (x - x_prev);
/// beta = 0 is the IHS and skips the momentum term entirely.
inline void run_heavy_ball(const LeastSquaresProblem& p, PreconditionerSource& source, const SolverConfig& cfg,
                                 const ErrorOracle* oracle, double mu, double beta, SolveTrace& tr) {
  if (cfg.max_iters < 1) throw DomainError("ihs: max_iters must be >= 1");
  tr.mu = mu;
  tr.beta = beta;
  Recorder rec(tr, cfg, oracle);

  Vector x = initial_point(p, cfg);
  Vector x_prev = x;
  int t = 0;
  bool done = false;
  for (;; ++t) {
    auto start = Clock::now();
    const Vector grad = hessian_times(p, x) - p.b;
    tr.wall.iterate += seconds_since(start);
    tr.flops.iterate += matvec_flops(p);
    done = rec.record(x, grad.norm());
    if (done || t == cfg.max_iters) break;

    const auto& f = source.at(t);
    start = Clock::now();
    const Vector v = solve(f, grad);
    Vector x_next = x - mu * v;
    if (beta != 0.0) x_next += beta * (x - x_prev);
    x_prev = std::move(x);
    x = std::move(x_next);
    tr.wall.iterate += seconds_since(start);
    tr.flops.iterate += solve_flops(f) + static_cast<std::uint64_t>(6 * p.d());
  }
  tr.iterations = t;
  tr.status = done ? SolveStatus::Converged : SolveStatus::MaxIterations;
  tr.x = std::move(x);
  return;
}

inline std::string flexible_name(const SolverConfig& cfg) {
  switch (cfg.truncation) {
    case Truncation::Full: return "gcc";
    case Truncation::One: return "ipcg";
    case Truncation::Fixed: return "fcg(" + std::to_string(cfg.k) + ")";
  }
  return "fcg";
}

/// Flexible CG with H-orthogonalization against the last k_t directions and
/// the exact line search alpha = <p, r> / <p, H p>.
inline void run_flexible(const LeastSquaresProblem& p, PreconditionerSource& source, const SolverConfig& cfg,
                               const ErrorOracle* oracle, SolveTrace& tr) {
  if (cfg.max_iters < 1) throw DomainError("fcg: max_iters must be >= 1");
  if (cfg.truncation == Truncation::Fixed && cfg.k < 0) throw DomainError("fcg: k must be >= 0");
  tr.method = flexible_name(cfg);
  tr.truncation = cfg.truncation;
  tr.k = cfg.truncation == Truncation::Fixed ? cfg.k : (cfg.truncation == Truncation::One ? 1 : -1);
  Recorder rec(tr, cfg, oracle);

  struct Direction {
    Vector p, hp;
    double curvature;
  };
  std::deque<Direction> memory;
  const std::size_t capacity = cfg.truncation == Truncation::Full ? std::numeric_limits<std::size_t>::max()
                               : cfg.truncation == Truncation::One ? 1
                                                                   : static_cast<std::size_t>(cfg.k);

  Vector x = initial_point(p, cfg);
  int t = 0;
  bool done = false;
  for (;; ++t) {
    auto start = Clock::now();
    const Vector r = p.b - hessian_times(p, x);
    tr.wall.iterate += seconds_since(start);
    tr.flops.iterate += matvec_flops(p);
    const double rnorm = r.norm();
    done = rec.record(x, rnorm);
    if (!done && rnorm == 0.0) done = true;
    if (done || t == cfg.max_iters) break;

    const auto& f = source.at(t);
    start = Clock::now();
    Vector dir = solve(f, r);
    std::uint64_t step_flops = solve_flops(f) + matvec_flops(p) + static_cast<std::uint64_t>(4 * p.d());
    // Modified Gram-Schmidt in the H inner product, newest direction first.
    for (auto it = memory.rbegin(); it != memory.rend(); ++it) {
      dir -= (dir.dot(it->hp) / it->curvature) * it->p;
      step_flops += static_cast<std::uint64_t>(4 * p.d());
    }
    Vector hp = hessian_times(p, dir);
    const double curvature = dir.dot(hp);
    if (!(curvature > 0.0)) throw BreakdownError(tr.method + ": non-positive curvature p^T H p", t);
    x += (dir.dot(r) / curvature) * dir;
    if (cfg.keep_iterates) tr.directions.push_back(dir);
    if (capacity > 0) {
      memory.push_back(Direction{std::move(dir), std::move(hp), curvature});
      if (memory.size() > capacity) memory.pop_front();
    }
    tr.wall.iterate += seconds_since(start);
    tr.flops.iterate += step_flops;
  }
  tr.iterations = t;
  tr.status = done ? SolveStatus::Converged : SolveStatus::MaxIterations;
  tr.x = std::move(x);
  return;
}

}  // namespace detail

/// PCG with a fixed, already factored preconditioner H_S.
inline SolveTrace pcg(const LeastSquaresProblem& p, const PreconditionerFactor& f, const SolverConfig& cfg,
                      const ErrorOracle* oracle = nullptr) {
  SolveTrace tr;
  detail::stamp(tr, cfg, cfg.m);
  tr.mode = SketchMode::Fixed;
  detail::PreconditionerSource source(f, tr.flops, tr.wall);
  detail::run_pcg(p, source, cfg, oracle, tr);
  return tr;
}

/// PCG with the fixed sketch draw(cfg.kind, cfg.m, n, cfg.seed).
inline SolveTrace pcg(const LeastSquaresProblem& p, const SolverConfig& cfg, const ErrorOracle* oracle = nullptr) {
  if (cfg.mode != SketchMode::Fixed) throw DomainError("pcg: needs a fixed sketch");
  SolveTrace tr;
  detail::stamp(tr, cfg, cfg.m);
  detail::PreconditionerSource source(p, cfg, tr.flops, tr.wall);
  detail::run_pcg(p, source, cfg, oracle, tr);
  return tr;
}

/// Iterative Hessian sketch, fixed or refreshed per cfg.mode.
inline SolveTrace ihs(const LeastSquaresProblem& p, const SolverConfig& cfg, const ErrorOracle* oracle = nullptr) {
  const auto params = resolve_parameters(false, p.n(), p.d(), cfg);
  SolveTrace tr;
  tr.method = "ihs";
  detail::stamp(tr, cfg, cfg.m);
  detail::PreconditionerSource source(p, cfg, tr.flops, tr.wall);
  detail::run_heavy_ball(p, source, cfg, oracle, params.mu, 0.0, tr);
  return tr;
}

/// IHS with a given fixed preconditioner; cfg.mu must be set.
inline SolveTrace ihs(const LeastSquaresProblem& p, const PreconditionerFactor& f, const SolverConfig& cfg,
                      const ErrorOracle* oracle = nullptr) {
  if (!cfg.mu) throw DomainError("ihs: explicit factor needs an explicit step size");
  SolveTrace tr;
  tr.method = "ihs";
  detail::stamp(tr, cfg, cfg.m);
  tr.mode = SketchMode::Fixed;
  detail::PreconditionerSource source(f, tr.flops, tr.wall);
  detail::run_heavy_ball(p, source, cfg, oracle, *cfg.mu, 0.0, tr);
  return tr;
}

/// IHS with heavy-ball momentum; x_{-1} = x_0.
inline SolveTrace polyak_ihs(const LeastSquaresProblem& p, const SolverConfig& cfg,
                             const ErrorOracle* oracle = nullptr) {
  const auto params = resolve_parameters(true, p.n(), p.d(), cfg);
  SolveTrace tr;
  tr.method = "polyak_ihs";
  detail::stamp(tr, cfg, cfg.m);
  detail::PreconditionerSource source(p, cfg, tr.flops, tr.wall);
  detail::run_heavy_ball(p, source, cfg, oracle, params.mu, params.beta, tr);
  return tr;
}

inline SolveTrace polyak_ihs(const LeastSquaresProblem& p, const PreconditionerFactor& f, const SolverConfig& cfg,
                             const ErrorOracle* oracle = nullptr) {
  if (!cfg.mu || !cfg.beta) throw DomainError("polyak_ihs: explicit factor needs explicit mu and beta");
  if (*cfg.beta < 0.0) throw DomainError("polyak_ihs: momentum must be >= 0");
  SolveTrace tr;
  tr.method = "polyak_ihs";
  detail::stamp(tr, cfg, cfg.m);
  tr.mode = SketchMode::Fixed;
  detail::PreconditionerSource source(f, tr.flops, tr.wall);
  detail::run_heavy_ball(p, source, cfg, oracle, *cfg.mu, *cfg.beta, tr);
  return tr;
}

/// Flexible CG family: GCC (full memory), FCG (k), IPCG (one).
inline SolveTrace fcg(const LeastSquaresProblem& p, const SolverConfig& cfg, const ErrorOracle* oracle = nullptr) {
  SolveTrace tr;
  detail::stamp(tr, cfg, cfg.m);
  detail::PreconditionerSource source(p, cfg, tr.flops, tr.wall);
  detail::run_flexible(p, source, cfg, oracle, tr);
  return tr;
}

inline SolveTrace fcg(const LeastSquaresProblem& p, const PreconditionerFactor& f, const SolverConfig& cfg,
                      const ErrorOracle* oracle = nullptr) {
  SolveTrace tr;
  detail::stamp(tr, cfg, cfg.m);
  tr.mode = SketchMode::Fixed;
  detail::PreconditionerSource source(f, tr.flops, tr.wall);
  detail::run_flexible(p, source, cfg, oracle, tr);
  return tr;
}

}  // namespace sketchsolve
