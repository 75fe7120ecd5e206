#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace alf {

inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs fn(y) for y in [0, height). Row results must not overlap; the row
/// assignment is dynamic, so fn must not depend on which worker runs it.
template <typename Fn>
void parallel_rows(int height, int threads, Fn&& fn) {
  threads = resolve_thread_count(threads);
  if (threads <= 1 || height < 2) {
    for (int y = 0; y < height; ++y) fn(y);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int y = next.fetch_add(1);
      if (y >= height) break;
      fn(y);
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min(threads, height);
  pool.reserve(n - 1);
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

/// Sums fn(y) over rows with a fixed association order (row 0 first), so the
/// result is bit-identical for any worker count. T needs operator+=.
template <typename T, typename Fn>
T ordered_row_sum(int height, int threads, Fn&& fn) {
  std::vector<T> partial(height);
  parallel_rows(height, threads, [&](int y) { partial[y] = fn(y); });
  T acc{};
  for (int y = 0; y < height; ++y) acc += partial[y];
  return acc;
}

}  // namespace alf
