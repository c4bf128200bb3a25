#include "radtrap/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace radtrap {

unsigned worker_threads(unsigned requested, std::size_t work_items)
{
  unsigned n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("RADTRAP_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v > 0)
        n = static_cast<unsigned>(v);
    }
  }
  if (n == 0)
    n = std::max(1u, std::thread::hardware_concurrency());
  if (work_items < n)
    n = static_cast<unsigned>(std::max<std::size_t>(1, work_items));
  return n;
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body)
{
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i)
      body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
      }
    }
  };

  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back(work);
  pool.clear();
  if (failure)
    std::rethrow_exception(failure);
}

}  // namespace radtrap
