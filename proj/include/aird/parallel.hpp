#pragma once

#include <cstddef>
#include <functional>

namespace aird {

// Worker count: AIRD_THREADS env var caps it, default hardware parallelism.
unsigned worker_count();

// Runs job(i) for i in [0, njobs). Blocks until all jobs finish. Jobs must
// write to disjoint outputs; any cross-job reduction is the caller's business
// and must be combined in a fixed order to stay bit-reproducible.
// Reentrant calls (from inside a job) run inline on the calling thread.
void parallel_jobs(std::size_t njobs, const std::function<void(std::size_t)>& job);

// Convenience: splits [0, n) into fixed chunks of `chunk` elements (layout
// independent of the worker count) and runs body(lo, hi) per chunk.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace aird
