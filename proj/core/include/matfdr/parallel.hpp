#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace matfdr {

/// Runs fn(0..count-1) across `threads` workers (0 = hardware concurrency).
/// The first exception is rethrown after all workers join.
inline void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads
                            : static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  workers = std::min(workers, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace matfdr
