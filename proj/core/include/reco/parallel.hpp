#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace reco {

// Worker count: RECO_LAB_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t thread_count();

// Runs fn(i) for i in [0, n) over contiguous chunks. Results must be written
// to per-index slots; the caller reduces them in a fixed order.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Sum of items[0..n) by a balanced binary tree over indices. The tree shape
// depends only on n, so the result is independent of the thread count.
template <typename T, typename Add>
T pairwise_reduce(std::vector<T> items, Add add) {
  if (items.empty()) return T{};
  for (std::size_t width = 1; width < items.size(); width *= 2)
    for (std::size_t i = 0; i + width < items.size(); i += 2 * width)
      add(items[i], items[i + width]);
  return std::move(items.front());
}

}  // namespace reco
