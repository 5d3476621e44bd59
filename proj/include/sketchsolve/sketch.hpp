#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sketchsolve/common.hpp"
#include "sketchsolve/fwht.hpp"
#include "sketchsolve/rng.hpp"

namespace sketchsolve {

/// Random embeddings supported by the solvers. Sparse embeddings are not
/// provided.
enum class SketchKind { Gaussian, Haar, SRHT };

inline std::string_view to_string(SketchKind kind) {
  switch (kind) {
    case SketchKind::Gaussian: return "gaussian";
    case SketchKind::Haar: return "haar";
    case SketchKind::SRHT: return "srht";
  }
  return "unknown";
}

inline std::optional<SketchKind> parse_sketch_kind(std::string_view name) {
  if (name == "gaussian") return SketchKind::Gaussian;
  if (name == "haar") return SketchKind::Haar;
  if (name == "srht") return SketchKind::SRHT;
  return std::nullopt;
}

/// Implicit form of S = scale * R * H * E, with H the unnormalized Hadamard
/// matrix of order padded_size and scale = 1/sqrt(padded_size), so that the
/// rows of S are orthonormal.
struct SrhtPayload {
  std::size_t padded_size = 0;
  std::vector<double> signs;   // diagonal of E, length padded_size
  std::vector<Index> rows;     // R, sorted and distinct, each < padded_size
  double scale = 1.0;
};

/// A realized m x n embedding.
///
/// Gaussian entries are N(0, 1/m), so E[S^T S] = I_n. Haar and SRHT operators
/// have orthonormal rows (S S^T = I_m), so E[S^T S] = (m / n) I_n, with n
/// replaced by the padded size for the SRHT.
class SketchOperator {
 public:
  static SketchOperator from_matrix(SketchKind kind, Matrix s) {
    SketchOperator op;
    op.kind_ = kind;
    op.m_ = s.rows();
    op.n_ = s.cols();
    op.payload_ = std::move(s);
    return op;
  }

  /// S = I_n. A valid Haar draw with m = n; mostly useful in tests.
  static SketchOperator identity(Index n) {
    return from_matrix(SketchKind::Haar, Matrix::Identity(n, n));
  }

  static SketchOperator from_srht(Index n, SrhtPayload payload) {
    SketchOperator op;
    op.kind_ = SketchKind::SRHT;
    op.m_ = static_cast<Index>(payload.rows.size());
    op.n_ = n;
    op.payload_ = std::move(payload);
    return op;
  }

  SketchKind kind() const noexcept { return kind_; }
  Index rows() const noexcept { return m_; }
  Index cols() const noexcept { return n_; }

  const Matrix* matrix() const noexcept { return std::get_if<Matrix>(&payload_); }
  const SrhtPayload* srht() const noexcept { return std::get_if<SrhtPayload>(&payload_); }

  /// Explicit m x n matrix. O(m n_pad log n_pad) for the SRHT.
  Matrix dense() const {
    if (const auto* s = matrix()) return *s;
    const auto& p = *srht();
    Matrix out(m_, n_);
    Vector e(static_cast<Index>(p.padded_size));
    for (Index j = 0; j < n_; ++j) {
      e.setZero();
      e(j) = p.signs[static_cast<std::size_t>(j)];
      fwht(e);
      for (Index i = 0; i < m_; ++i) out(i, j) = p.scale * e(p.rows[static_cast<std::size_t>(i)]);
    }
    return out;
  }

 private:
  SketchKind kind_ = SketchKind::Gaussian;
  Index m_ = 0;
  Index n_ = 0;
  std::variant<Matrix, SrhtPayload> payload_;
};

/// Draws an m x n embedding, deterministically in `seed`.
inline SketchOperator draw(SketchKind kind, Index m, Index n, std::uint64_t seed) {
  if (m < 1 || n < 1) throw DimensionError("draw: sketch dimensions must be positive");
  Rng rng = make_rng(seed);
  switch (kind) {
    case SketchKind::Gaussian: {
      Matrix s = standard_normal(m, n, rng) / std::sqrt(static_cast<double>(m));
      return SketchOperator::from_matrix(kind, std::move(s));
    }
    case SketchKind::Haar: {
      if (m > n)
        throw DimensionError("draw: Haar embedding needs m <= n (m=" + std::to_string(m) +
                             ", n=" + std::to_string(n) + ")");
      Matrix s = haar_orthonormal(n, m, rng).transpose();
      return SketchOperator::from_matrix(kind, std::move(s));
    }
    case SketchKind::SRHT: {
      const std::size_t n_pad = next_power_of_two(static_cast<std::size_t>(n));
      if (static_cast<std::size_t>(m) > n_pad)
        throw DimensionError("draw: SRHT needs m <= padded size " + std::to_string(n_pad));
      SrhtPayload p;
      p.padded_size = n_pad;
      p.scale = 1.0 / std::sqrt(static_cast<double>(n_pad));
      p.signs.resize(n_pad);
      std::bernoulli_distribution coin(0.5);
      for (auto& s : p.signs) s = coin(rng) ? 1.0 : -1.0;
      // Partial Fisher-Yates: first m entries are a uniform sample without replacement.
      std::vector<Index> perm(n_pad);
      std::iota(perm.begin(), perm.end(), Index{0});
      for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n_pad - 1);
        std::swap(perm[i], perm[pick(rng)]);
      }
      p.rows.assign(perm.begin(), perm.begin() + m);
      std::sort(p.rows.begin(), p.rows.end());
      return SketchOperator::from_srht(n, std::move(p));
    }
  }
  throw DomainError("draw: unknown sketch kind");
}

/// Flops spent generating the operator (Haar QR; negligible otherwise).
inline std::uint64_t draw_flops(SketchKind kind, Index m, Index n) {
  if (kind == SketchKind::Haar) return static_cast<std::uint64_t>(2 * n * m * m);
  return 0;
}

/// Flops of apply(S, A) for an A with d columns.
inline std::uint64_t apply_flops(const SketchOperator& s, Index d) {
  if (const auto* p = s.srht())
    return static_cast<std::uint64_t>(d) * (fwht_flops(p->padded_size) + p->padded_size +
                                            static_cast<std::uint64_t>(s.rows()));
  return static_cast<std::uint64_t>(2 * s.rows() * s.cols() * d);
}

/// S * A for an n x d matrix A.
///
/// SRHT path: zero-pad each column to the padded size, flip signs, transform,
/// keep the selected rows and rescale.
inline Matrix apply(const SketchOperator& s, const Matrix& a) {
  if (a.rows() != s.cols())
    throw DimensionError("apply: sketch has " + std::to_string(s.cols()) + " columns, matrix has " +
                         std::to_string(a.rows()) + " rows");
  if (const auto* mat = s.matrix()) return (*mat) * a;

  const auto& p = *s.srht();
  const Index n = a.rows();
  const Index d = a.cols();
  const Index n_pad = static_cast<Index>(p.padded_size);
  Matrix out(s.rows(), d);
  Vector buf(n_pad);
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < n; ++i) buf(i) = p.signs[static_cast<std::size_t>(i)] * a(i, j);
    buf.tail(n_pad - n).setZero();
    fwht(buf);
    for (Index i = 0; i < s.rows(); ++i) out(i, j) = p.scale * buf(p.rows[static_cast<std::size_t>(i)]);
  }
  return out;
}

/// Dimension against which the sketch is isotropic up to scale: n for Gaussian
/// and Haar, the padded size for the SRHT.
inline Index effective_dimension(SketchKind kind, Index n) {
  return kind == SketchKind::SRHT ? static_cast<Index>(next_power_of_two(static_cast<std::size_t>(n))) : n;
}

}  // namespace sketchsolve
