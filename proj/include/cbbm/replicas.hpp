#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace cbbm {

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Run `fn(r)` for r in [0, count) on up to `threads` workers and return the
/// results in replica order regardless of completion order. Workers share
/// nothing but `fn`; the first exception thrown by any replica is rethrown.
template <class Result, class Fn>
std::vector<Result> run_replicas(std::size_t count, unsigned threads, Fn&& fn) {
  std::vector<Result> results(count);
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), count));
  if (workers <= 1) {
    for (std::size_t r = 0; r < count; ++r) results[r] = fn(r);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= count) return;
      try {
        results[r] = fn(r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace cbbm
