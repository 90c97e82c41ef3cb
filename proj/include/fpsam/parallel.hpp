#pragma once

#include <cstddef>
#include <exception>
#include <limits>
#include <thread>
#include <utility>
#include <vector>

namespace fpsam {

inline size_t resolve_workers(size_t requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Applies fn(i) for i in [0, n) across `workers` threads and returns results
// in index order, so downstream aggregation is independent of worker count.
// If calls throw, the exception from the lowest index is rethrown.
template <typename Fn>
auto parallel_map(size_t n, size_t workers, Fn&& fn)
    -> std::vector<decltype(fn(size_t{0}))> {
  using Result = decltype(fn(size_t{0}));
  std::vector<Result> results(n);
  workers = resolve_workers(workers);
  if (workers <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) results[i] = fn(i);
    return results;
  }

  std::vector<std::pair<size_t, std::exception_ptr>> errors(
      workers, {std::numeric_limits<size_t>::max(), nullptr});
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < n; i += workers) {
        try {
          results[i] = fn(i);
        } catch (...) {
          errors[w] = {i, std::current_exception()};
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();

  const std::pair<size_t, std::exception_ptr>* first = nullptr;
  for (const auto& e : errors) {
    if (e.second && (!first || e.first < first->first)) first = &e;
  }
  if (first) std::rethrow_exception(first->second);
  return results;
}

}  // namespace fpsam
