#pragma once

#include <cstddef>
#include <functional>

namespace sessionlens {

// Worker count: hardware concurrency, capped by SESSIONLENS_THREADS when set.
// Always at least 1.
unsigned thread_budget();

// Runs fn(0) .. fn(n-1), splitting indices across the thread budget. Callers
// keep determinism by writing only to per-index slots. Exceptions from fn are
// rethrown on the calling thread (first one wins).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace sessionlens
