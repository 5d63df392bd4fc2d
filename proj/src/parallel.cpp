#include "parallel.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <thread>
#include <vector>

namespace dctkd::detail {

int worker_count() {
  static const int workers = [] {
    if (const char* env = std::getenv("DCTKD_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return std::min(v, 64);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return std::clamp(static_cast<int>(hw), 1, 8);
  }();
  return workers;
}

int parallel_chunk_count(int n) {
  return std::max(1, std::min(worker_count(), n));
}

void parallel_chunks(int n, const std::function<void(int, int, int)>& fn) {
  const int chunks = parallel_chunk_count(n);
  auto bound = [&](int t) {
    return static_cast<int>(static_cast<int64_t>(n) * t / chunks);
  };
  if (chunks <= 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(chunks) - 1);
  for (int t = 1; t < chunks; ++t)
    threads.emplace_back([&, t] { fn(t, bound(t), bound(t + 1)); });
  fn(0, bound(0), bound(1));
  for (auto& th : threads) th.join();
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  parallel_chunks(n, [&](int, int lo, int hi) {
    for (int i = lo; i < hi; ++i) fn(i);
  });
}

}  // namespace dctkd::detail
