#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace zubov {

/// Number of worker threads to use for a request of `requested` (0 = all
/// available cores).
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, count) into `threads` contiguous chunks and runs
/// body(chunk, begin, end) on each. The chunk layout depends only on `count`
/// and `threads`, so callers can reduce per-chunk results in a fixed order.
/// The first exception thrown by any chunk is rethrown.
template <class Body>
void parallel_chunks(std::size_t count, int threads, Body&& body) {
  const std::size_t t = std::min<std::size_t>(std::max(1, threads), std::max<std::size_t>(count, 1));
  if (t <= 1) {
    body(std::size_t{0}, std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(t);
  const std::size_t per = (count + t - 1) / t;
  for (std::size_t c = 0; c < t; ++c) {
    const std::size_t b = std::min(count, c * per), e = std::min(count, b + per);
    pool.emplace_back([&, c, b, e] {
      try {
        body(c, b, e);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace zubov
