#pragma once

#include <cstddef>
#include <functional>

namespace radtrap {

/// Thread count from `requested` if non-zero, else RADTRAP_THREADS (if set and
/// positive), else hardware concurrency; clamped to [1, work_items].
unsigned worker_threads(unsigned requested, std::size_t work_items);

/// Runs body(i) for i in [0, count) on `threads` workers. Items are handed out
/// in order; the first exception thrown by any item is rethrown.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace radtrap
