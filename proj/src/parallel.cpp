#include "ssdr/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ssdr {

namespace {
thread_local bool inside_worker = false;
}

int worker_count() {
  int n = 0;
  if (const char* env = std::getenv("SSDR_THREADS")) {
    n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  return n > 0 ? n : 1;
}

void parallel_for(Index count, const std::function<void(Index)>& fn) {
  if (count <= 0) return;
  int workers = worker_count();
  if (inside_worker || workers <= 1 || count == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  if (static_cast<Index>(workers) > count) workers = static_cast<int>(count);

  std::atomic<Index> next(0);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&]() {
    inside_worker = true;
    for (;;) {
      Index i = next.fetch_add(1);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
    inside_worker = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers - 1));
  for (int t = 1; t < workers; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ssdr
