#pragma once

#include <cstdint>
#include <functional>

namespace dim {

// Worker cap: min(hardware threads, DIM_THREADS env var when set).
int max_threads();

// Runs fn(i) for i in [0, n) across at most max_threads() workers. Items must
// be independent; exceptions from workers are rethrown on the caller thread.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace dim
