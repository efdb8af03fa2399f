#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace fastperm {

// Worker count for column-parallel loops. FASTPERM_WORKERS overrides the
// hardware default; results are identical for any value.
inline int default_worker_count() {
  if (const char* env = std::getenv("FASTPERM_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<int>(std::min<long>(n, 256));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(worker_id, begin, end) over a static partition of [0, n).
// Each index is owned by exactly one worker, so writes to per-index slots
// need no synchronization and the output is independent of worker count.
inline void parallel_chunks(int64_t n, int workers,
                            const std::function<void(int, int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  workers = static_cast<int>(std::max<int64_t>(1, std::min<int64_t>(workers, n)));
  if (workers == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int64_t begin = n * w / workers;
    const int64_t end = n * (w + 1) / workers;
    pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace fastperm
