#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace mmfair::detail {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Splits [0, n) into `chunks` contiguous ranges and runs fn(chunk, begin, end)
// on up to `threads` workers. Callers reduce per-chunk results in chunk
// order, so the outcome does not depend on scheduling.
template <class Fn>
void parallel_chunks(std::int64_t n, int chunks, int threads, Fn&& fn) {
  chunks = static_cast<int>(std::max<std::int64_t>(1, std::min<std::int64_t>(chunks, n)));
  threads = std::min(resolve_threads(threads), chunks);
  auto range = [&](int c, std::int64_t& b, std::int64_t& e) {
    b = n * c / chunks;
    e = n * (c + 1) / chunks;
  };
  if (threads <= 1) {
    for (int c = 0; c < chunks; ++c) {
      std::int64_t b, e;
      range(c, b, e);
      fn(c, b, e);
    }
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (int c = t; c < chunks; c += threads) {
          std::int64_t b, e;
          range(c, b, e);
          fn(c, b, e);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace mmfair::detail
