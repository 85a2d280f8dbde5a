#ifndef GIBBSFLOW_PARALLEL_HPP
#define GIBBSFLOW_PARALLEL_HPP

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gibbsflow {

/// Runs body(i) for i in [0, n) over `threads` workers in contiguous
/// chunks. Results must be written by index so the outcome does not depend
/// on scheduling. threads <= 1 runs inline. The first exception thrown by
/// any worker is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::int64_t n, unsigned threads, Body&& body) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  const auto workers = static_cast<std::int64_t>(std::min<std::int64_t>(threads, n));
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (std::int64_t w = 0; w < workers; ++w) {
    const std::int64_t begin = n * w / workers;
    const std::int64_t end = n * (w + 1) / workers;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::int64_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Worker count used when a caller asks for "all cores".
inline unsigned hardware_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1u : n;
}

}  // namespace gibbsflow

#endif  // GIBBSFLOW_PARALLEL_HPP
