#pragma once

#include <cstddef>
#include <functional>

namespace surad {

// Global worker cap. 1 means sequential; 0 resets to hardware concurrency.
void set_worker_count(int n);
int worker_count();

std::size_t chunk_count(std::size_t n, std::size_t chunk_size);

// Runs fn(chunk_index, begin, end) over [0,n) split into fixed-size chunks.
// Chunk boundaries depend only on n and chunk_size, never on the worker
// count, so per-chunk partial results merged in chunk order are bit-identical
// for any number of workers.
void parallel_chunks(std::size_t n, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

// Element-wise parallel loop for disjoint writes.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace surad
