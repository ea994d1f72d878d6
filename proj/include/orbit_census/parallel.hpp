#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace orbit_census {

// Caps the number of threads any single call may use. Results never depend on
// the worker count: work is split into fixed shards and merged in shard order.
struct Parallelism {
  unsigned workers = 1;
};

// Runs body(i) for i in [0, count) on up to par.workers threads. The first
// exception thrown by any shard is rethrown on the calling thread.
template <class Body>
void parallel_for(std::size_t count, const Parallelism& par, Body&& body) {
  const std::size_t threads = std::min<std::size_t>(std::max(1u, par.workers), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Maps shards to results; the returned vector is in shard order.
template <class Result, class Body>
std::vector<Result> parallel_map(std::size_t count, const Parallelism& par, Body&& body) {
  std::vector<Result> out(count);
  parallel_for(count, par, [&](std::size_t i) { out[i] = body(i); });
  return out;
}

}  // namespace orbit_census
