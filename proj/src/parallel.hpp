#pragma once

#include <functional>

namespace dctkd::detail {

// Worker count: DCTKD_THREADS if set, otherwise hardware concurrency, capped
// at 8 and never below 1.
int worker_count();

// Number of chunks parallel_chunks will use for n items.
int parallel_chunk_count(int n);

// Runs fn(t, lo, hi) for chunk t covering items [lo, hi). The partition is a
// pure function of n and the worker count, never of scheduling, so callers
// can keep per-chunk accumulation buffers and reduce them in chunk order for
// deterministic results.
void parallel_chunks(int n, const std::function<void(int, int, int)>& fn);

// Runs fn(i) for i in [0, n) over the same fixed partition.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace dctkd::detail
