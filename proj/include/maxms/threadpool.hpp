#ifndef MAXMS_THREADPOOL_HPP
#define MAXMS_THREADPOOL_HPP

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "maxms/common.hpp"

// Index-slotted parallel loop: workers pull indices from an atomic counter and
// write results into caller-owned slots, so output never depends on scheduling.

namespace maxms {

inline void parallel_for(i64 n, int jobs, const std::function<void(i64)>& body) {
  if (n <= 0) return;
  int workers = int(std::min<i64>(std::max(1, jobs), n));
  if (workers == 1) {
    for (i64 i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<i64> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto run = [&] {
    for (;;) {
      i64 i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace maxms

#endif
