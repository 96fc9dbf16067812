#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "invadelab/weights.hpp"

namespace invadelab {

/// Seed of trial i; never sequential so neighbouring trials are uncorrelated.
constexpr std::uint64_t trial_seed(std::uint64_t seed0, std::int64_t i) {
  return mix64(seed0, static_cast<std::uint64_t>(i));
}

/// INVADELAB_WORKERS if set and positive, else hardware concurrency.
int default_workers();

/// Runs fn(i) for i in [0, trials) on `workers` threads pulling indices from a
/// shared counter. fn must write only to slot i of caller-owned storage; the
/// caller merges slots in index order, which makes results independent of
/// scheduling. The first exception thrown by any worker is rethrown.
template <typename Fn>
void for_each_trial(std::int64_t trials, int workers, Fn&& fn) {
  if (trials <= 0) return;
  if (workers <= 0) workers = default_workers();
  workers = static_cast<int>(std::min<std::int64_t>(workers, trials));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < trials; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= trials) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(trials);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace invadelab
