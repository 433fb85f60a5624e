#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace adnn {

inline int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Runs fn(chunk_index, begin, end) over a fixed contiguous partition of
// [begin, end) into `threads` chunks. The partition depends only on
// (begin, end, threads), so callers that reduce per-chunk results in chunk
// order get identical output for a fixed thread count.
inline void parallel_chunks(int begin, int end, int threads,
                            const std::function<void(int, int, int)>& fn) {
  const int total = end - begin;
  if (total <= 0) return;
  threads = std::max(1, std::min(threads, total));
  if (threads == 1) {
    fn(0, begin, end);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  const int base = total / threads;
  const int rem = total % threads;
  int cursor = begin;
  for (int c = 0; c < threads; ++c) {
    const int len = base + (c < rem ? 1 : 0);
    const int lo = cursor;
    const int hi = cursor + len;
    cursor = hi;
    pool.emplace_back([c, lo, hi, &fn] { fn(c, lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace adnn
