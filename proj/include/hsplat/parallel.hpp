#pragma once

#include <cstddef>
#include <functional>

namespace hsplat {

// Worker cap: VISIONARY_THREADS if set to a positive integer, else the
// hardware concurrency (at least 1).
int worker_count();

// Runs fn(chunk, begin, end) over [0, n) split into fixed-size chunks.
// Chunk boundaries depend only on n and grain, never on the worker count,
// so callers that write per-chunk outputs stay deterministic.
void parallel_chunks(std::size_t n, std::size_t grain,
                     const std::function<void(std::size_t chunk, std::size_t begin, std::size_t end)>& fn,
                     int workers = 0);

inline std::size_t chunk_count(std::size_t n, std::size_t grain) { return grain == 0 ? 0 : (n + grain - 1) / grain; }

}  // namespace hsplat
