#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace zeno {

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Each index is handled
/// exactly once, so writing into slot i of a preallocated vector keeps results
/// independent of scheduling. The first exception thrown is rethrown here.
template <class Body>
void parallel_for(std::size_t n, unsigned jobs, Body&& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(jobs, 1u), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace zeno
