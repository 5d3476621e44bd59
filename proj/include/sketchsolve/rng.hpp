#pragma once

#include <cstdint>
#include <random>

#include "sketchsolve/common.hpp"

namespace sketchsolve {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the independent stream `stream` derived from `base`.
///
/// Refreshed sketches use derive_seed(seed, t) for iteration t; Monte-Carlo
/// trials use derive_seed(seed, trial). Both arguments are mixed, so nearby
/// (base, stream) pairs do not alias the way a plain XOR would.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
  return splitmix64(base ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

/// rows x cols matrix of i.i.d. N(0, 1) entries, filled column by column.
inline Matrix standard_normal(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

inline Vector standard_normal(Index size, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(size);
  for (Index i = 0; i < size; ++i) out(i) = normal(rng);
  return out;
}

/// Orthonormal rows x cols (rows >= cols) matrix distributed uniformly on the
/// Stiefel manifold: QR of a Gaussian matrix with each column of Q multiplied
/// by the sign of the matching diagonal entry of R.
inline Matrix haar_orthonormal(Index rows, Index cols, Rng& rng) {
  Matrix g = standard_normal(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  const Matrix& r = qr.matrixQR();
  for (Index j = 0; j < cols; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

}  // namespace sketchsolve
