#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <thread>
#include <vector>

namespace planemerge {

// Worker count: PLANEMERGE_THREADS when set to a positive integer, otherwise
// the hardware concurrency (at least 1).
inline int ThreadCount() {
  if (const char* env = std::getenv("PLANEMERGE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Calls fn(i) for every i in [0, n). Indices are split into contiguous blocks,
// one per worker; fn must only write state owned by index i, which keeps the
// result independent of the schedule.
template <typename Fn>
void ParallelFor(size_t n, Fn&& fn) {
  const size_t workers = std::min<size_t>(static_cast<size_t>(ThreadCount()), n);
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const size_t block = (n + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    const size_t begin = w * block;
    const size_t end = std::min(n, begin + block);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &fn] {
      for (size_t i = begin; i < end; ++i) fn(i);
    });
  }
}

}  // namespace planemerge
