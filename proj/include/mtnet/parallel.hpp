#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mtnet {

/// Runs fn(k) for k in [0, count) on up to `threads` workers (0 = hardware
/// concurrency). Indices are handed out in blocks; callers write results to
/// slot k so the outcome does not depend on scheduling. The first exception
/// thrown by any worker is rethrown after all workers join.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned threads = 0,
                  std::size_t block = 64) {
  if (count == 0) return;
  unsigned hw = threads ? threads : std::thread::hardware_concurrency();
  hw = std::max(1u, hw);
  const std::size_t blocks = (count + block - 1) / block;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(hw, blocks));
  if (workers <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      const std::size_t end = std::min(count, (b + 1) * block);
      try {
        for (std::size_t k = b * block; k < end; ++k) fn(k);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(blocks);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/// Pairwise (cascade) summation; the result depends only on the order of
/// `values`, not on how they were produced.
inline double pairwise_sum(const double* values, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += values[k];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(v.data(), v.size());
}

}  // namespace mtnet
