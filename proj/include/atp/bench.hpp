#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "atp/encoder.hpp"
#include "atp/matrix.hpp"
#include "atp/opcount.hpp"

namespace atp {

// Counted work split by pipeline stage. The standard pipeline has an empty
// decompose stage; everything else is filled for both modes so the
// "decomposition is not the bottleneck" claim stays checkable from reports.
struct StageCounts {
    OpCounter decompose;
    OpCounter projection;
    OpCounter attention;

    OpCounter total() const;
};

// Closed-form counts for one single-head forward at the given sizes. These
// are the same per-kernel formulas the instrumented ops use, summed by
// hand, so measured_run can demand exact integer agreement.
//
//   standard:  projection 3*L*d*d', attention 2*L^2*d', score scratch L^2
//   lowrank:   decomposition (2*inner_iters + 1)*r*L*d,
//              projection 3*r*d*d' + L*r*d', attention 2*r*L*d',
//              score scratch r*L
StageCounts predicted_stage_ops(std::size_t L, std::size_t r, std::size_t d, std::size_t dp,
                                ForwardMode mode, std::size_t inner_iters = 2);
OpCounter predicted_ops(std::size_t L, std::size_t r, std::size_t d, std::size_t dp,
                        ForwardMode mode, std::size_t inner_iters = 2);

struct RunRecord {
    std::size_t L = 0;
    std::size_t r = 0;
    std::size_t d = 0;
    std::size_t dp = 0;
    ForwardMode mode = ForwardMode::standard;
    StageCounts stages;
    std::uint64_t multiplies = 0;
    std::uint64_t adds = 0;
    std::uint64_t peak_values_held = 0;
    std::uint64_t wall_ns = 0; // median over the timed repeats
    std::size_t repeats = 0;
};

// Seeds an input, runs the selected single-head pipeline once to warm up,
// then `repeats` timed passes on a monotonic clock. Counts come from
// instrumented kernels and always equal predicted_ops exactly.
//
// If a budget applies (argument, else the ATP_MEMORY_BUDGET_BYTES
// environment variable), a run whose predicted peak working set exceeds it
// is refused up front with the prediction attached. element_size is the
// bytes-per-entry figure used for that accounting only; arithmetic always
// runs at full precision.
RunRecord measured_run(std::size_t L, std::size_t r, std::size_t d, std::size_t dp,
                       ForwardMode mode, std::uint64_t seed, std::size_t repeats = 5,
                       std::size_t inner_iters = 2,
                       std::optional<std::uint64_t> budget_bytes = std::nullopt,
                       std::size_t element_size = sizeof(double));

struct SweepConfig {
    std::vector<std::size_t> lengths;
    std::size_t r = 0;
    std::size_t d = 0;
    std::size_t dp = 0;
    std::size_t inner_iters = 2;
    std::size_t repeats = 5;
    std::vector<std::uint64_t> seeds;
};

struct ScalingReport {
    SweepConfig config;
    std::vector<RunRecord> runs; // per length: standard first, then lowrank
    // Least-squares log-log slope of wall time vs L, absent below two lengths.
    std::optional<double> slope_standard;
    std::optional<double> slope_lowrank;
};

// Runs both modes at every length (seed cycling through `seeds`) and fits
// the wall-time scaling exponents. `parallel` launches one thread per run
// with its own counters; record order stays deterministic either way.
ScalingReport scaling_sweep(const std::vector<std::size_t> &lengths, std::size_t r,
                            std::size_t d, std::size_t dp,
                            const std::vector<std::uint64_t> &seeds, std::size_t repeats = 5,
                            std::size_t inner_iters = 2, bool parallel = false,
                            std::optional<std::uint64_t> budget_bytes = std::nullopt,
                            std::size_t element_size = sizeof(double));

nlohmann::json bench_report_json(const ScalingReport &report);

// One row per run: L,r,d,dp,mode,multiplies,adds,peak_values_held,wall_ns,repeats
std::string bench_report_csv(const ScalingReport &report);

} // namespace atp
