#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "sketchsolve/common.hpp"
#include "sketchsolve/sketch.hpp"

namespace sketchsolve {

/// Principal branch W(a) on [0, inf): the solution of W e^W = a.
inline double lambert_w(double a) {
  if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("lambert_w: need finite a >= 0");
  if (a == 0.0) return 0.0;
  double w;
  if (a < 2.0) {
    w = std::log1p(a);
  } else {
    const double l1 = std::log(a);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }
  const double tol = 1e-12 * std::max(1.0, a);
  for (int it = 0; it < 100; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - a;
    if (std::abs(f) <= tol) return w;
    const double fp = ew * (w + 1.0);
    const double step = f / (fp - (w + 2.0) * f / (2.0 * w + 2.0));
    w -= step;
    if (std::abs(step) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(w)) break;
  }
  if (std::abs(w * std::exp(w) - a) > tol) throw NumericalError("lambert_w: Halley iteration did not converge");
  return w;
}

/// Flop model C(m) = sketch(m) + m d^2 + n d ln(1/eps) / ln(m / m_ref) of PCG
/// with a fixed sketch, with m_ref = d ln d (SRHT) or d (Gaussian). All logs
/// are natural.
struct CostModel {
  double n = 0;
  double d = 0;
  double epsilon = 0.5;
  SketchKind kind = SketchKind::SRHT;
  /// Gaussian only: charge the serial n d m sketch instead of the parallel n d.
  bool serial_gaussian = false;

  double m_ref() const { return kind == SketchKind::SRHT ? d * std::log(d) : d; }

  double sketch_cost(double m) const {
    if (kind == SketchKind::SRHT) return n * d * std::log(m);
    return serial_gaussian ? n * d * m : n * d;
  }
  double factor_cost(double m) const { return m * d * d; }
  double iter_cost(double m) const {
    if (!(m > m_ref())) throw DomainError("CostModel: need m > m_ref");
    return n * d * std::log(1.0 / epsilon) / std::log(m / m_ref());
  }
  double total(double m) const { return sketch_cost(m) + factor_cost(m) + iter_cost(m); }
};

namespace detail {

inline void check_tuning_domain(double n, double d, double epsilon) {
  if (!(d >= 2.0)) throw DomainError("tuning: need d >= 2");
  if (!(n > d * d)) throw DomainError("tuning: need n > d^2 (highly overdetermined regime)");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("tuning: need 0 < epsilon < 1");
}

}  // namespace detail

enum class SrhtCase { I, II };

inline std::string_view to_string(SrhtCase c) { return c == SrhtCase::I ? "i" : "ii"; }

struct SrhtSketchSize {
  double m_star = 0;  // rounded up
  SrhtCase regime = SrhtCase::I;
  double predicted_cost = 0;
};

/// Optimized SRHT sketch size, hidden constants taken as 1.
inline SrhtSketchSize srht_opt_sketch_size(double n, double d, double epsilon) {
  detail::check_tuning_domain(n, d, epsilon);
  const double log_inv_eps = std::log(1.0 / epsilon);
  const double log_ratio = std::log(n / (d * d));
  SrhtSketchSize out;
  double m;
  if (std::sqrt(log_inv_eps) < log_ratio) {
    out.regime = SrhtCase::I;
    m = std::exp(std::sqrt(log_inv_eps)) * d * std::log(d);
  } else {
    out.regime = SrhtCase::II;
    m = (n / d) * std::max(std::log(d), log_inv_eps / log_ratio);
  }
  out.m_star = std::ceil(m);
  const CostModel model{n, d, epsilon, SketchKind::SRHT, false};
  out.predicted_cost = model.total(out.m_star);
  return out;
}

struct GaussianSketchSize {
  double m_star = 0;  // rounded up
  double alpha = 0;   // e^{W(a)}, unrounded
  double a = 0;       // (n/d^2) ln(1/eps)
  double predicted_cost = 0;
};

/// Optimized Gaussian sketch size m* = d exp(W((n/d^2) ln(1/eps))) with the
/// predicted cost 2 d^3 alpha*.
inline GaussianSketchSize gaussian_opt_sketch_size(double n, double d, double epsilon) {
  detail::check_tuning_domain(n, d, epsilon);
  GaussianSketchSize out;
  out.a = n / (d * d) * std::log(1.0 / epsilon);
  out.alpha = std::exp(lambert_w(out.a));
  out.m_star = std::ceil(d * out.alpha);
  out.predicted_cost = 2.0 * d * d * d * out.alpha;
  return out;
}

/// Leading-order cost of the optimized sketch over the classical one,
/// constants dropped.
inline double cost_ratio_vs_classical(SketchKind kind, double n, double d, double epsilon) {
  detail::check_tuning_domain(n, d, epsilon);
  const double log_inv_eps = std::log(1.0 / epsilon);
  const double log_ratio = std::log(n / (d * d));
  if (kind == SketchKind::Gaussian) return (log_inv_eps / log_ratio) / log_inv_eps;
  if (kind != SketchKind::SRHT) throw DomainError("cost_ratio_vs_classical: only gaussian and srht have a cost model");
  const double classical = std::log(d) + log_inv_eps;
  if (std::sqrt(log_inv_eps) < log_ratio) return (std::log(d) + std::sqrt(log_inv_eps)) / classical;
  return (std::log(d) + log_inv_eps / log_ratio) / classical;
}

/// Classical prescription: 4 d ln d rows for the SRHT, 4 d for Gaussian.
inline double classical_sketch_size(SketchKind kind, double d) {
  return kind == SketchKind::SRHT ? std::ceil(4.0 * d * std::log(d)) : 4.0 * d;
}

struct CostPoint {
  double m = 0;
  double sketch = 0;
  double factor = 0;
  double iterate = 0;
  double total = 0;
};

/// Evaluates the model on `points` geometrically spaced sizes in (lo, hi].
inline std::vector<CostPoint> cost_sweep(const CostModel& model, double lo, double hi, int points) {
  if (points < 2) throw DomainError("cost_sweep: need at least 2 points");
  if (!(lo >= model.m_ref()) || !(hi > lo)) throw DomainError("cost_sweep: need m_ref <= lo < hi");
  std::vector<CostPoint> out;
  out.reserve(static_cast<std::size_t>(points));
  const double ratio = std::log(hi / lo);
  for (int i = 1; i <= points; ++i) {
    const double m = lo * std::exp(ratio * static_cast<double>(i) / static_cast<double>(points));
    out.push_back({m, model.sketch_cost(m), model.factor_cost(m), model.iter_cost(m), model.total(m)});
  }
  return out;
}

}  // namespace sketchsolve
