#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace rsen {

// Worker cap: RSEN_THREADS env var, default all cores. Results never depend
// on the thread count; only the static partition of work does.
inline int worker_count() {
  if (const char* env = std::getenv("RSEN_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static block partition of [0, n). fn(begin, end) runs once per block.
template <typename Fn>
void parallel_blocks(int n, Fn&& fn) {
  const int workers = std::min(worker_count(), n > 0 ? n : 1);
  if (workers <= 1 || n <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int t = 0; t < workers; ++t) {
    const int begin = t * chunk;
    const int end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace rsen
