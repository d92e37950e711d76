#pragma once

#include <cstdint>

namespace txseg {

/**
 * @brief Counter-based SplitMix64 generator.
 *
 * Draw i of a stream is mix(seed + (i+1) * 0x9E3779B97F4A7C15), so the
 * sequence depends only on the seed and the draw index. The mixing function
 * and the derived uniform/normal transforms are fixed, which makes sampled
 * patch sets and initial filter banks reproducible across platforms.
 */
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64();

    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t uniform_index(std::uint64_t bound);

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01();

    /// Standard normal via Box-Muller; the second variate is cached.
    double normal();

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace txseg
