#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace txseg {

/// Caps the worker count used by parallel_for. 0 selects hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/**
 * @brief Runs body(chunk_begin, chunk_end) over [0, count) in fixed-size chunks.
 *
 * Chunk boundaries depend only on count and chunk, never on the worker count,
 * so any per-chunk partial result is identical for 1 or N threads.
 */
void parallel_for(std::size_t count, std::size_t chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

inline std::size_t chunk_count(std::size_t count, std::size_t chunk) {
    return (count + chunk - 1) / chunk;
}

/// Sums per-chunk partials in chunk order (deterministic reduction).
template <typename T>
T ordered_sum(const std::vector<T>& partials, T zero) {
    for (const auto& p : partials) {
        zero += p;
    }
    return zero;
}

}  // namespace txseg
