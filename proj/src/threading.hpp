#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace idp {

// Worker count from IDP_THREADS (default 1). Thread count never changes
// results: work items write disjoint preallocated slots and every reduction
// happens afterwards in a fixed order.
inline int configured_threads() {
  if (const char* env = std::getenv("IDP_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

template <typename Fn>
void parallel_for(int n, const Fn& fn) {
  const int threads = std::min(configured_threads(), n > 0 ? n : 1);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace idp
