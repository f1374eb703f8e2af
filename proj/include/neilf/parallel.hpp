#pragma once

#include <cstddef>
#include <functional>

namespace neilf {

// Worker count from NEILF_WORKERS, else hardware concurrency (at least 1).
int default_worker_count();

// Runs task(i) for i in [0, count) on up to `workers` threads. Tasks must not share mutable state;
// callers that reduce results do so afterwards in index order.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task, int workers = 0);

}  // namespace neilf
