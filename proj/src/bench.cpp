#include "atp/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "atp/attention.hpp"
#include "atp/errors.hpp"
#include "atp/kernels.hpp"
#include "atp/lowrank.hpp"
#include "atp/ops.hpp"
#include "atp/rng.hpp"

namespace atp {

namespace {

void check_sizes(std::size_t L, std::size_t r, std::size_t d, std::size_t dp) {
    if (L == 0 || r == 0 || d == 0 || dp == 0)
        throw invalid_input_error("benchmark dimensions must be positive");
    if (r > std::min(L, d))
        throw invalid_input_error("rank " + std::to_string(r) + " exceeds min(L, d) = " +
                                  std::to_string(std::min(L, d)));
}

// Counts for one m x n product over a k-deep reduction, same model as the
// instrumented kernels.
void add_matmul(OpCounter &c, std::uint64_t m, std::uint64_t k, std::uint64_t n) {
    c.count_mul_add(m * k * n, m * n * (k - 1));
}

std::optional<std::uint64_t> budget_from_env() {
    const char *raw = std::getenv("ATP_MEMORY_BUDGET_BYTES");
    if (!raw || !*raw) return std::nullopt;
    char *end = nullptr;
    const unsigned long long value = std::strtoull(raw, &end, 10);
    if (end == raw || *end != '\0')
        throw invalid_input_error(std::string("ATP_MEMORY_BUDGET_BYTES is not a byte count: ") +
                                  raw);
    return static_cast<std::uint64_t>(value);
}

std::uint64_t median_ns(std::vector<std::uint64_t> samples) {
    std::sort(samples.begin(), samples.end());
    const std::size_t mid = samples.size() / 2;
    if (samples.size() % 2 == 1) return samples[mid];
    return (samples[mid - 1] + samples[mid]) / 2;
}

double loglog_slope(const std::vector<double> &x, const std::vector<double> &y) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += std::log(x[i]);
        sy += std::log(y[i]);
    }
    const double mx = sx / x.size(), my = sy / y.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        num += dx * (std::log(y[i]) - my);
        den += dx * dx;
    }
    return num / den;
}

} // namespace

OpCounter StageCounts::total() const {
    OpCounter merged = decompose;
    merged.merge(projection);
    merged.merge(attention);
    return merged;
}

StageCounts predicted_stage_ops(std::size_t L, std::size_t r, std::size_t d, std::size_t dp,
                                ForwardMode mode, std::size_t inner_iters) {
    check_sizes(L, r, d, dp);
    StageCounts stages;
    if (mode == ForwardMode::standard) {
        for (int p = 0; p < 3; ++p) add_matmul(stages.projection, L, d, dp);
        add_matmul(stages.attention, L, dp, L); // scores q.k^T
        add_matmul(stages.attention, L, L, dp); // value mix
        stages.attention.alloc(static_cast<std::uint64_t>(L) * L);
        stages.attention.release(static_cast<std::uint64_t>(L) * L);
        return stages;
    }
    // Per component: inner_iters rounds of X.v and X^T.u, then one deflation
    // at one multiply and one add per entry.
    for (std::size_t c = 0; c < r; ++c) {
        for (std::size_t it = 0; it < inner_iters; ++it) {
            add_matmul(stages.decompose, L, d, 1);
            add_matmul(stages.decompose, d, L, 1);
        }
        stages.decompose.count_mul_add(static_cast<std::uint64_t>(L) * d,
                                       static_cast<std::uint64_t>(L) * d);
    }
    for (int p = 0; p < 3; ++p) add_matmul(stages.projection, r, d, dp);
    add_matmul(stages.projection, L, r, dp); // queries back to full length
    add_matmul(stages.attention, L, dp, r);  // scores q.Kp^T
    add_matmul(stages.attention, L, r, dp);  // value mix
    stages.attention.alloc(static_cast<std::uint64_t>(r) * L);
    stages.attention.release(static_cast<std::uint64_t>(r) * L);
    return stages;
}

OpCounter predicted_ops(std::size_t L, std::size_t r, std::size_t d, std::size_t dp,
                        ForwardMode mode, std::size_t inner_iters) {
    return predicted_stage_ops(L, r, d, dp, mode, inner_iters).total();
}

RunRecord measured_run(std::size_t L, std::size_t r, std::size_t d, std::size_t dp,
                       ForwardMode mode, std::uint64_t seed, std::size_t repeats,
                       std::size_t inner_iters, std::optional<std::uint64_t> budget_bytes,
                       std::size_t element_size) {
    check_sizes(L, r, d, dp);
    if (repeats == 0) throw invalid_input_error("repeats must be positive");

    const OpCounter predicted = predicted_ops(L, r, d, dp, mode, inner_iters);
    const std::optional<std::uint64_t> budget =
        budget_bytes ? budget_bytes : budget_from_env();
    if (budget && predicted.peak_values_held * element_size > *budget)
        throw memory_budget_error("refusing " + std::string(to_string(mode)) +
                                      " run at L=" + std::to_string(L),
                                  predicted.peak_values_held * element_size, *budget);

    Rng rng(seed);
    Matrix x = Matrix::uninit(L, d);
    rng.fill_normal(x.data(), x.size());
    AttentionWeights weights;
    const double fan = 1.0 / std::sqrt(static_cast<double>(d));
    for (Matrix *w : {&weights.wq, &weights.wk, &weights.wv}) {
        *w = Matrix::uninit(d, dp);
        rng.fill_normal(w->data(), w->size());
        kernels::scale(fan, w->data(), w->size());
    }
    const AttentionConfig config;

    const auto run_once = [&](StageCounts *stages) {
        OpCounter *dec = stages ? &stages->decompose : nullptr;
        OpCounter *proj = stages ? &stages->projection : nullptr;
        OpCounter *att = stages ? &stages->attention : nullptr;
        if (mode == ForwardMode::lowrank) {
            LowRankFactors factors = alternating_lowrank(x, r, inner_iters, seed, dec);
            ProjectedQkv pq = project_qkv(factors, weights, proj);
            lowrank_attention(pq.q, pq.kp, pq.vp, factors.U, config, false, att);
        } else {
            Matrix q = ops::matmul(x, weights.wq, proj);
            Matrix k = ops::matmul(x, weights.wk, proj);
            Matrix v = ops::matmul(x, weights.wv, proj);
            standard_attention(q, k, v, config, false, att);
        }
    };

    RunRecord rec;
    rec.L = L;
    rec.r = r;
    rec.d = d;
    rec.dp = dp;
    rec.mode = mode;
    rec.repeats = repeats;

    run_once(&rec.stages); // warm-up, discarded from timing, supplies counts

    std::vector<std::uint64_t> samples;
    samples.reserve(repeats);
    for (std::size_t rep = 0; rep < repeats; ++rep) {
        const auto start = std::chrono::steady_clock::now();
        run_once(nullptr);
        const auto stop = std::chrono::steady_clock::now();
        samples.push_back(static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count()));
    }
    rec.wall_ns = median_ns(std::move(samples));

    const OpCounter total = rec.stages.total();
    rec.multiplies = total.multiplies;
    rec.adds = total.adds;
    rec.peak_values_held = total.peak_values_held;
    return rec;
}

ScalingReport scaling_sweep(const std::vector<std::size_t> &lengths, std::size_t r,
                            std::size_t d, std::size_t dp,
                            const std::vector<std::uint64_t> &seeds, std::size_t repeats,
                            std::size_t inner_iters, bool parallel,
                            std::optional<std::uint64_t> budget_bytes,
                            std::size_t element_size) {
    if (lengths.empty()) throw invalid_input_error("scaling sweep needs at least one length");
    for (std::size_t i = 1; i < lengths.size(); ++i)
        if (lengths[i] <= lengths[i - 1])
            throw invalid_input_error("sweep lengths must be ascending");
    if (seeds.empty()) throw invalid_input_error("scaling sweep needs at least one seed");

    ScalingReport report;
    report.config = {lengths, r, d, dp, inner_iters, repeats, seeds};
    report.runs.resize(lengths.size() * 2);

    const auto fill = [&](std::size_t i, ForwardMode mode, std::size_t slot) {
        report.runs[slot] = measured_run(lengths[i], r, d, dp, mode,
                                         seeds[i % seeds.size()], repeats, inner_iters,
                                         budget_bytes, element_size);
    };
    if (parallel) {
        std::vector<std::thread> workers;
        std::vector<std::exception_ptr> failures(report.runs.size());
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            for (ForwardMode mode : {ForwardMode::standard, ForwardMode::lowrank}) {
                const std::size_t slot = 2 * i + (mode == ForwardMode::lowrank ? 1 : 0);
                workers.emplace_back([&, i, mode, slot] {
                    try {
                        fill(i, mode, slot);
                    } catch (...) {
                        failures[slot] = std::current_exception();
                    }
                });
            }
        }
        for (auto &w : workers) w.join();
        for (const auto &failure : failures)
            if (failure) std::rethrow_exception(failure);
    } else {
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            fill(i, ForwardMode::standard, 2 * i);
            fill(i, ForwardMode::lowrank, 2 * i + 1);
        }
    }

    if (lengths.size() >= 2) {
        for (ForwardMode mode : {ForwardMode::standard, ForwardMode::lowrank}) {
            std::vector<double> ls, ts;
            for (const auto &run : report.runs) {
                if (run.mode != mode) continue;
                ls.push_back(static_cast<double>(run.L));
                ts.push_back(static_cast<double>(std::max<std::uint64_t>(run.wall_ns, 1)));
            }
            const double slope = loglog_slope(ls, ts);
            (mode == ForwardMode::standard ? report.slope_standard : report.slope_lowrank) =
                slope;
        }
    }
    return report;
}

nlohmann::json bench_report_json(const ScalingReport &report) {
    nlohmann::json j;
    j["config"] = {{"lengths", report.config.lengths},
                   {"r", report.config.r},
                   {"d", report.config.d},
                   {"dp", report.config.dp},
                   {"inner_iters", report.config.inner_iters},
                   {"repeats", report.config.repeats},
                   {"seeds", report.config.seeds}};
    j["runs"] = nlohmann::json::array();
    for (const auto &run : report.runs) {
        const auto stage_json = [](const OpCounter &c) {
            return nlohmann::json{{"multiplies", c.multiplies}, {"adds", c.adds}};
        };
        nlohmann::json stages = {{"decompose", stage_json(run.stages.decompose)},
                                 {"projection", stage_json(run.stages.projection)},
                                 {"attention", stage_json(run.stages.attention)}};
        j["runs"].push_back({{"L", run.L},
                             {"r", run.r},
                             {"d", run.d},
                             {"dp", run.dp},
                             {"mode", to_string(run.mode)},
                             {"multiplies", run.multiplies},
                             {"adds", run.adds},
                             {"peak_values_held", run.peak_values_held},
                             {"wall_ns", run.wall_ns},
                             {"repeats", run.repeats},
                             {"stages", stages}});
    }
    j["slopes"] = {{"standard", report.slope_standard ? nlohmann::json(*report.slope_standard)
                                                      : nlohmann::json()},
                   {"lowrank", report.slope_lowrank ? nlohmann::json(*report.slope_lowrank)
                                                    : nlohmann::json()}};
    return j;
}

std::string bench_report_csv(const ScalingReport &report) {
    std::ostringstream out;
    out << "L,r,d,dp,mode,multiplies,adds,peak_values_held,wall_ns,repeats\n";
    for (const auto &run : report.runs)
        out << run.L << ',' << run.r << ',' << run.d << ',' << run.dp << ','
            << to_string(run.mode) << ',' << run.multiplies << ',' << run.adds << ','
            << run.peak_values_held << ',' << run.wall_ns << ',' << run.repeats << '\n';
    return out.str();
}

} // namespace atp
