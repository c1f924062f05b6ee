#pragma once

#include <algorithm>
#include <cstdint>

namespace atp {

// Tallies of the dot-product-class work inside a measured region. Only the
// multiply/accumulate kernels feed these counts; epilogues (exp, scaling,
// norms, row normalization) stay off the books so measured totals line up
// with the closed-form predictions as integers.
//
// peak_values_held tracks the largest number of simultaneously-live matrix
// entries the measured stage allocated, via alloc()/release() bracketing.
struct OpCounter {
    std::uint64_t multiplies = 0;
    std::uint64_t adds = 0;
    std::uint64_t peak_values_held = 0;

    void count_mul_add(std::uint64_t mul, std::uint64_t add) {
        multiplies += mul;
        adds += add;
    }

    void alloc(std::uint64_t values) {
        live_ += values;
        peak_values_held = std::max(peak_values_held, live_);
    }

    void release(std::uint64_t values) { live_ = values > live_ ? 0 : live_ - values; }

    // Sequential composition: counts accumulate, peaks take the max (the
    // merged region's allocations are released before the next begins).
    void merge(const OpCounter &other) {
        multiplies += other.multiplies;
        adds += other.adds;
        peak_values_held = std::max(peak_values_held, other.peak_values_held);
    }

private:
    std::uint64_t live_ = 0;
};

} // namespace atp
