#pragma once

#include <bit>
#include <cstddef>
#include <span>

#include "sketchsolve/common.hpp"

namespace sketchsolve {

constexpr bool is_power_of_two(std::size_t n) noexcept { return std::has_single_bit(n); }

/// Smallest power of two >= n (n >= 1).
constexpr std::size_t next_power_of_two(std::size_t n) noexcept { return std::bit_ceil(n); }

/// In-place unnormalized Walsh-Hadamard transform (Sylvester ordering).
/// Applying it twice multiplies the input by its length.
inline void fwht(std::span<double> x) {
  const std::size_t len = x.size();
  if (!is_power_of_two(len))
    throw DimensionError("fwht: length " + std::to_string(len) + " is not a power of two");
  for (std::size_t h = 1; h < len; h *= 2) {
    for (std::size_t i = 0; i < len; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = x[j];
        const double b = x[j + h];
        x[j] = a + b;
        x[j + h] = a - b;
      }
    }
  }
}

inline void fwht(Vector& x) { fwht(std::span<double>(x.data(), static_cast<std::size_t>(x.size()))); }

/// Additions performed by one transform of the given length.
constexpr std::uint64_t fwht_flops(std::size_t len) noexcept {
  return len <= 1 ? 0 : static_cast<std::uint64_t>(len) * static_cast<std::uint64_t>(std::bit_width(len) - 1);
}

}  // namespace sketchsolve
