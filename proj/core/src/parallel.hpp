#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace rigrecon::detail {

/// Runs body(i) for i in [0, count) on up to `threads` workers, each taking a
/// contiguous block. Callers write results into per-index slots and reduce
/// them in index order afterwards, so the outcome does not depend on the
/// thread count. The exception of the lowest failing block is rethrown.
template <class Body>
void parallel_for(size_t count, int threads, Body&& body) {
  const size_t workers = std::min(count, static_cast<size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  auto run_block = [&](size_t w) {
    const size_t begin = count * w / workers;
    const size_t end = count * (w + 1) / workers;
    try {
      for (size_t i = begin; i < end; ++i) body(i);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  for (size_t w = 1; w < workers; ++w) pool.emplace_back(run_block, w);
  run_block(0);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace rigrecon::detail
