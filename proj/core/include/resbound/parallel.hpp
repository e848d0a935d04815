#pragma once

#include <cstddef>
#include <functional>

namespace resbound {

// Worker count: RESBOUND_THREADS when set (>= 1), else hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n) across workers. Each index writes only its own
// output slot, so results are byte-identical for any worker count. The first
// exception thrown by a worker is rethrown on the calling thread.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace resbound
