#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace sketchsolve {

/// Runs fn(0), ..., fn(count - 1) on up to `jobs` threads and returns the
/// results in index order, so the output never depends on scheduling. The
/// first exception (by index) is rethrown after all workers finish.
template <class Result, class Fn>
std::vector<Result> run_trials(std::size_t count, unsigned jobs, Fn&& fn) {
  std::vector<Result> results(count);
  std::vector<std::exception_ptr> errors(count);
  const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));

  auto work = [&](std::size_t worker) {
    for (std::size_t i = worker; i < count; i += workers) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

/// Default worker count: hardware concurrency, at least one.
inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace sketchsolve
