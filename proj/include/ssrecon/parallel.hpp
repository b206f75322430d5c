#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace ssrecon {

/// 0 means "all hardware threads".
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, count) into `threads` contiguous chunks and calls
/// fn(begin, end, chunk_index) for each. Chunk boundaries depend only on
/// count and threads, so per-chunk results can be reduced in a fixed order.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    fn(0, count, 0);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    const int begin = static_cast<int>(static_cast<long long>(count) * t / threads);
    const int end = static_cast<int>(static_cast<long long>(count) * (t + 1) / threads);
    workers.emplace_back([&fn, begin, end, t] { fn(begin, end, t); });
  }
}

}  // namespace ssrecon
