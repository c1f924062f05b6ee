#include "atp/entropy.hpp"

#include <algorithm>
#include <cmath>

#include "atp/errors.hpp"

namespace atp {

std::size_t guarded_ceil(double x) {
    const double backed = x * (1.0 - 4e-16);
    const double c = std::ceil(backed);
    return c < 1.0 ? 1 : static_cast<std::size_t>(c);
}

EntropyReport svd_entropy(std::vector<double> singular_values, std::size_t L) {
    if (singular_values.empty() || L == 0)
        throw invalid_input_error("svd_entropy needs a spectrum and a positive length");
    for (double s : singular_values)
        if (!(s >= 0.0) || !std::isfinite(s))
            throw invalid_input_error("singular values must be finite and non-negative");
    std::sort(singular_values.begin(), singular_values.end(), std::greater<>());

    double total = 0.0;
    for (double s : singular_values) total += s;
    if (total == 0.0) throw degenerate_input_error("all-zero spectrum has no entropy");

    double sum_sq = 0.0;
    for (double s : singular_values) {
        const double sbar = s / total;
        sum_sq += sbar * sbar;
    }

    const std::size_t m = singular_values.size();
    double mu = -std::log2(sum_sq);
    mu = std::clamp(mu, 0.0, std::log2(static_cast<double>(m)));

    EntropyReport report;
    report.mu = mu;
    report.effective_rank = std::min(guarded_ceil(std::exp2(mu)), m);
    report.ratio = static_cast<double>(report.effective_rank) / static_cast<double>(L);
    return report;
}

RankPolicy RankPolicy::Fixed(std::size_t r) {
    if (r == 0) throw invalid_input_error("fixed rank must be positive");
    RankPolicy p;
    p.kind = Kind::fixed;
    p.fixed_r = r;
    return p;
}

RankPolicy RankPolicy::Fraction(double f) {
    if (!(f > 0.0) || f > 1.0 || !std::isfinite(f))
        throw invalid_input_error("rank fraction must lie in (0, 1]");
    RankPolicy p;
    p.kind = Kind::fraction;
    p.fraction = f;
    return p;
}

RankPolicy RankPolicy::Entropy(double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw invalid_input_error("entropy scale must be positive");
    RankPolicy p;
    p.kind = Kind::entropy;
    p.scale = scale;
    return p;
}

std::size_t select_rank(const EntropyReport &report, const RankPolicy &policy,
                        std::size_t L, std::size_t d) {
    if (L == 0 || d == 0) throw invalid_input_error("select_rank needs positive dimensions");
    std::size_t r = 1;
    switch (policy.kind) {
    case RankPolicy::Kind::fixed:
        r = policy.fixed_r;
        break;
    case RankPolicy::Kind::fraction:
        r = guarded_ceil(policy.fraction * static_cast<double>(L));
        break;
    case RankPolicy::Kind::entropy:
        r = guarded_ceil(policy.scale * std::exp2(report.mu));
        break;
    }
    return std::clamp<std::size_t>(r, 1, std::min(L, d));
}

std::size_t select_rank(const std::vector<double> &spectrum, const RankPolicy &policy,
                        std::size_t L, std::size_t d) {
    if (policy.kind != RankPolicy::Kind::entropy) {
        EntropyReport unused;
        return select_rank(unused, policy, L, d);
    }
    return select_rank(svd_entropy(spectrum, L), policy, L, d);
}

} // namespace atp
