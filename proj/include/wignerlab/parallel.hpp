#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace wignerlab {

namespace detail {
inline std::atomic<unsigned>& thread_cap_storage() {
  static std::atomic<unsigned> cap{0};
  return cap;
}
}  // namespace detail

/// Caps internal parallelism. 0 restores the default (WIGNERLAB_THREADS, then hardware).
inline void set_max_threads(unsigned n) { detail::thread_cap_storage().store(n); }

inline unsigned max_threads() {
  unsigned cap = detail::thread_cap_storage().load();
  if (cap > 0) return cap;
  if (const char* env = std::getenv("WIGNERLAB_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(task) for task in [0, n_tasks) on up to max_threads() workers.
/// Callers write results into per-task slots and reduce them in task order, so
/// output never depends on scheduling.
template <class Body>
void parallel_for(std::size_t n_tasks, Body&& body) {
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(max_threads(), n_tasks));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n_tasks) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_tasks);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      carry += (sum - t) + x;
    else
      carry += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace wignerlab
