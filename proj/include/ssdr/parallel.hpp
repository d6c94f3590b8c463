#pragma once

#include <functional>

#include "ssdr/types.hpp"

namespace ssdr {

/// Worker cap: SSDR_THREADS env var; 0 or unset means hardware concurrency.
int worker_count();

/// Runs fn(i) for i in [0, count) on up to worker_count() threads.
///
/// Tasks must be independent; callers reduce by task index afterwards so
/// results do not depend on the thread count. Nested calls run inline on
/// the calling worker.
void parallel_for(Index count, const std::function<void(Index)>& fn);

}  // namespace ssdr
