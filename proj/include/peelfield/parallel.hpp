#pragma once

#include <cstddef>
#include <functional>

namespace peelfield {

// Worker count: LEADFIELD_THREADS if set (clamped to >= 1), otherwise
// std::thread::hardware_concurrency().
int worker_count();

// Runs fn(i) for i in [0, n) on worker_count() threads with static block
// scheduling.  Each index owns its output slot, so results are identical at
// any thread count; exceptions are captured and rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace peelfield
