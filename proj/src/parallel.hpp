#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>
#include <vector>

namespace mmfld::detail {

// Splits [0, n) into `workers` contiguous chunks and runs body(begin, end) on each.
// The first exception, in chunk order, is rethrown after all workers join.
template <class Body>
void parallel_for(std::int64_t n, int workers, Body&& body) {
  if (workers <= 1 || n < 2) {
    body(std::int64_t{0}, n);
    return;
  }
  const std::int64_t chunks = std::min<std::int64_t>(workers, n);
  std::vector<std::exception_ptr> errors(chunks);
  {
    std::vector<std::jthread> threads;
    threads.reserve(chunks);
    for (std::int64_t c = 0; c < chunks; ++c) {
      const std::int64_t begin = n * c / chunks;
      const std::int64_t end = n * (c + 1) / chunks;
      threads.emplace_back([&, c, begin, end] {
        try {
          body(begin, end);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace mmfld::detail
