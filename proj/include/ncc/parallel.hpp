#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ncc {

// Static chunking over [0, n); each index writes only its own slot, so the
// result is identical for any worker count.
inline void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (n == 0) return;
  const size_t workers =
      std::min<size_t>(n, static_cast<size_t>(jobs > 1 ? jobs : 1));
  if (workers <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> threads;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ncc
