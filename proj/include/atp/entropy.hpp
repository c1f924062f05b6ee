#pragma once

#include <cstddef>
#include <vector>

#include "atp/matrix.hpp"

namespace atp {

// Spectrum flatness summary: mu is the base-2 entropy of the squared
// normalized singular values, effective_rank = ceil(2^mu) is the component
// count that entropy implies, ratio relates it to the sequence length.
struct EntropyReport {
    double mu = 0.0;
    std::size_t effective_rank = 1;
    double ratio = 0.0;
};

// mu = -log2(sum_i sbar_i^2) with sbar_i = s_i / sum_j s_j. The spectrum may
// arrive in any order; entries must be non-negative with at least one
// strictly positive.
EntropyReport svd_entropy(std::vector<double> singular_values, std::size_t L);

// Rank selection rule applied before decomposition.
struct RankPolicy {
    enum class Kind { fixed, fraction, entropy };

    static RankPolicy Fixed(std::size_t r);
    static RankPolicy Fraction(double f);      // f in (0, 1], r = max(1, ceil(f * L))
    static RankPolicy Entropy(double scale);   // r = min(L, ceil(scale * 2^mu))

    Kind kind = Kind::fixed;
    std::size_t fixed_r = 1;
    double fraction = 1.0;
    double scale = 1.0;
};

// Resolved rank, clamped to [1, min(L, d)].
std::size_t select_rank(const EntropyReport &report, const RankPolicy &policy,
                        std::size_t L, std::size_t d);
std::size_t select_rank(const std::vector<double> &spectrum, const RankPolicy &policy,
                        std::size_t L, std::size_t d);

// ceil with a two-ulp relative backoff so values that are integers up to
// rounding noise do not spill into the next bucket.
std::size_t guarded_ceil(double x);

} // namespace atp
