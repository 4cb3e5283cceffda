// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace affrec {

/// Number of workers used when the caller passes 0.
inline unsigned default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs body(begin, end) over contiguous chunks of [0, n). Results must be
/// written per index so the outcome does not depend on the worker count.
template <typename Body>
void parallel_for(std::size_t n, unsigned workers, Body&& body) {
  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Sum of fn(begin, end) over fixed blocks of [0, n), added in block order.
/// The block layout does not depend on `workers`, so the floating-point
/// result is the same for any worker count.
template <typename T, typename Fn>
T blocked_reduce(std::size_t n, unsigned workers, T zero, Fn&& fn, std::size_t block = 8192) {
  const std::size_t blocks = (n + block - 1) / block;
  std::vector<T> partial(blocks, zero);
  parallel_for(blocks, workers, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) partial[b] = fn(b * block, std::min(n, (b + 1) * block));
  });
  T acc = zero;
  for (const auto& p : partial) acc = acc + p;
  return acc;
}

}  // namespace affrec
