#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace latbma {

// Runs body(begin, end) over contiguous chunks of [0, n) on up to `threads`
// threads. The first exception thrown by any chunk is rethrown.
template <typename Body>
void parallel_for(int n, int threads, int min_chunk, Body&& body) {
  const int workers = std::clamp(std::min(threads, n / std::max(min_chunk, 1)), 1, 256);
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, w, lo, hi] {
      try {
        body(lo, hi);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace latbma
