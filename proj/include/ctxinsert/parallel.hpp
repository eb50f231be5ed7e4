#pragma once

#include <cstddef>
#include <functional>

namespace ctxinsert {

// Number of workers to use when the caller does not say: hardware
// concurrency, at least 1.
size_t default_thread_count();

// Runs fn(i) for every i in [0, n) on up to n_threads workers. fn must only
// write to state owned by index i; iteration order is unspecified. The first
// exception thrown by any worker is rethrown on the calling thread.
void parallel_for(size_t n, size_t n_threads, const std::function<void(size_t)>& fn);

}  // namespace ctxinsert
