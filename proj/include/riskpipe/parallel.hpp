#pragma once

#include <cstddef>
#include <functional>

namespace riskpipe {

// Runs fn(0..n-1) on at most `limit` worker threads. fn must not throw;
// batch callers record per-item failures as data.
void bounded_parallel_for(std::size_t n, int limit, const std::function<void(std::size_t)>& fn);

}  // namespace riskpipe
