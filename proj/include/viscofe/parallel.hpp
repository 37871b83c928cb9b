#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace viscofe {

/// Runs body(begin, end) over [0, n) split into contiguous chunks, one per
/// worker. The first exception thrown by any worker is rethrown.
template <class Body>
void parallel_chunks(std::size_t n, int threads, Body&& body) {
  const std::size_t nthreads = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, std::max<std::size_t>(n, 1));
  if (nthreads == 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(nthreads);
  const std::size_t chunk = (n + nthreads - 1) / nthreads;
  for (std::size_t k = 0; k < nthreads; ++k) {
    pool.emplace_back([&, k] {
      try {
        body(std::min(n, k * chunk), std::min(n, (k + 1) * chunk));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace viscofe
