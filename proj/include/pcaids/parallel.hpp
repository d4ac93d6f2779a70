#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pcaids {

namespace detail {
inline std::atomic<unsigned>& thread_setting() {
  static std::atomic<unsigned> threads{0};
  return threads;
}

inline bool& inside_parallel_region() {
  thread_local bool inside = false;
  return inside;
}
}  // namespace detail

/// Worker count for parallel loops; 0 means one per hardware thread.
inline void set_thread_count(unsigned count) { detail::thread_setting() = count; }

inline unsigned thread_count() {
  unsigned t = detail::thread_setting();
  if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
  return t;
}

/// Runs body(i) for i in [0, count). Each index is visited exactly once, so
/// callers that write results into slot i get output independent of
/// scheduling. The first exception thrown by any worker is rethrown. Nested
/// calls run serially on the calling worker.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers =
      detail::inside_parallel_region() ? 1 : std::min<std::size_t>(thread_count(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    detail::inside_parallel_region() = true;
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
        break;
      }
    }
    detail::inside_parallel_region() = false;
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace pcaids
