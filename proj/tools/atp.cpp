// Command-line front end: corpus profiling, decomposition, attention
// comparison, scaling benchmarks, derivative checks, and synthetic corpora.
//
// Exit codes: 0 success, 1 usage or fatal error, 2 partial per-entry
// failure, 3 resource refusal, 4 check failure.
#include "CLI11.hpp"
#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "atp/analysis.hpp"
#include "atp/attention.hpp"
#include "atp/bench.hpp"
#include "atp/encoder.hpp"
#include "atp/entropy.hpp"
#include "atp/errors.hpp"
#include "atp/io.hpp"
#include "atp/lowrank.hpp"
#include "atp/ops.hpp"
#include "atp/rng.hpp"
#include "atp/svd.hpp"

namespace {

using atp::Matrix;

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string precision = "f64";
    std::string output;
    std::string format = "json";
};

atp::io::Dtype dtype_of(const GlobalOpts &g) {
    return g.precision == "f32" ? atp::io::Dtype::f32 : atp::io::Dtype::f64;
}

std::size_t element_size_of(const GlobalOpts &g) { return g.precision == "f32" ? 4 : 8; }

// JSON or CSV text to --output, stdout otherwise.
void emit(const GlobalOpts &g, const std::string &text) {
    if (g.output.empty()) {
        std::cout << text << "\n";
        return;
    }
    std::ofstream out(g.output);
    if (!out) throw atp::invalid_input_error("cannot write output file " + g.output);
    out << text << "\n";
}

double rel_frob(const Matrix &a, const Matrix &b) {
    Matrix diff = a;
    for (std::size_t t = 0; t < diff.size(); ++t) diff.data()[t] -= b.data()[t];
    const double ref = atp::ops::frob_norm(b);
    return atp::ops::frob_norm(diff) / (ref > 0.0 ? ref : 1.0);
}

Matrix column_block(const Matrix &m, std::size_t lo, std::size_t width) {
    Matrix out = Matrix::uninit(m.rows(), width);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t c = 0; c < width; ++c) out(i, c) = m(i, lo + c);
    return out;
}

// ---------------------------------------------------------------- profile

int cmd_profile(const GlobalOpts &g, const std::string &manifest_path, std::size_t bins,
                const std::vector<std::string> &buckets) {
    atp::CorpusManifest manifest = atp::load_manifest(manifest_path);
    if (!buckets.empty()) {
        manifest.bins.clear();
        for (const std::string &spec : buckets) {
            const auto colon = spec.find(':');
            if (colon == std::string::npos)
                throw atp::invalid_input_error("bucket must be lo:hi, got " + spec);
            manifest.bins.push_back({std::stoull(spec.substr(0, colon)),
                                     std::stoull(spec.substr(colon + 1))});
        }
    }
    const atp::ProfileReport report = atp::profile_corpus(manifest, bins);
    emit(g, g.format == "csv" ? atp::profile_report_csv(report)
                              : atp::profile_report_json(report).dump(2));
    return report.errors.empty() ? 0 : 2;
}

// -------------------------------------------------------------- decompose

int cmd_decompose(const GlobalOpts &g, const std::string &input_path,
                  const atp::RankPolicy &policy, const std::string &method,
                  bool reorthogonalize, std::size_t inner_iters) {
    const Matrix x = atp::io::read_matrix(input_path);
    atp::LowRankFactors factors;
    if (method == "exact") {
        const atp::SvdResult svd = atp::exact_svd(x);
        const std::size_t r = atp::select_rank(svd.singular_values, policy, x.rows(), x.cols());
        factors = atp::exact_truncate(svd, r);
    } else {
        std::size_t r;
        if (policy.kind == atp::RankPolicy::Kind::entropy)
            r = atp::select_rank(atp::exact_svd(x).singular_values, policy, x.rows(), x.cols());
        else
            r = atp::select_rank(atp::EntropyReport{}, policy, x.rows(), x.cols());
        factors = atp::alternating_lowrank(x, r, inner_iters, g.seed);
        if (reorthogonalize) factors = atp::reorthogonalize(factors);
    }

    const Matrix rec = atp::reconstruct(factors);
    const double x_norm = atp::ops::frob_norm(x);
    const double residual =
        x_norm > 0.0 ? atp::ops::frob_norm(atp::ops::sub(x, rec)) / x_norm : 0.0;

    // Worst entry of U^T U - I.
    double defect = 0.0;
    for (std::size_t a = 0; a < factors.r; ++a)
        for (std::size_t b = 0; b < factors.r; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < factors.U.rows(); ++i)
                s += factors.U(i, a) * factors.U(i, b);
            defect = std::max(defect, std::abs(s - (a == b ? 1.0 : 0.0)));
        }

    const std::filesystem::path dir = g.output.empty() ? "." : g.output;
    std::filesystem::create_directories(dir);
    atp::io::write_matx(dir / "U.matx", factors.U, dtype_of(g));
    atp::io::write_matx(dir / "Xp.matx", factors.Xp, dtype_of(g));

    nlohmann::json j = {{"r", factors.r},
                        {"residual", residual},
                        {"energy_ratio", atp::energy_ratio(x, factors)},
                        {"orthonormality_defect", defect},
                        {"method", method},
                        {"orthonormal", factors.orthonormal}};
    std::ofstream out(dir / "factors.json");
    out << j.dump(2) << "\n";
    std::cout << j.dump(2) << "\n";
    return 0;
}

// ----------------------------------------------------------------- attend

// Dense first-order reference at full length: reconstruct Q, K, V from the
// same factors the low-rank path uses, then run the dense kernel per head.
Matrix oracle_attention(const atp::LowRankFactors &factors,
                        const atp::AttentionWeights &weights, atp::AttentionConfig config,
                        double rope_base) {
    Matrix q = atp::ops::matmul(factors.U, atp::ops::matmul(factors.Xp, weights.wq));
    Matrix k = atp::ops::matmul(factors.U, atp::ops::matmul(factors.Xp, weights.wk));
    const Matrix v = atp::ops::matmul(factors.U, atp::ops::matmul(factors.Xp, weights.wv));
    if (config.rope) {
        std::vector<std::int64_t> positions(q.rows());
        for (std::size_t i = 0; i < positions.size(); ++i)
            positions[i] = static_cast<std::int64_t>(i);
        q = atp::apply_rope(q, positions, rope_base);
        k = atp::apply_rope(k, positions, rope_base);
    }
    const std::size_t hd = weights.head_dim();
    Matrix out = Matrix::uninit(q.rows(), weights.proj_dim());
    for (std::size_t h = 0; h < weights.heads; ++h) {
        const Matrix qh = column_block(q, h * hd, hd);
        const Matrix kh = column_block(k, h * hd, hd);
        const Matrix vh = column_block(v, h * hd, hd);
        const Matrix oh = atp::taylor_dense_attention(qh, kh, vh, config).output;
        for (std::size_t i = 0; i < out.rows(); ++i)
            for (std::size_t c = 0; c < hd; ++c) out(i, h * hd + c) = oh(i, c);
    }
    return out;
}

int cmd_attend(const GlobalOpts &g, const std::string &x_path, const std::string &weights_dir,
               const std::string &mode, bool compare, std::size_t inner_iters) {
    const Matrix x = atp::io::read_matrix(x_path);
    auto [layer, pe] = atp::load_layer_bundle(weights_dir);
    atp::AttentionConfig config = layer.config;
    config.rope = pe.mode == atp::PositionalEncoding::Mode::rotary;

    std::optional<atp::LowRankFactors> factors;
    const auto factorize = [&]() -> const atp::LowRankFactors & {
        if (!factors)
            factors = atp::decompose_input(x, layer.rank_policy, inner_iters, g.seed);
        return *factors;
    };
    const auto compute = [&](const std::string &m) -> Matrix {
        if (m == "standard")
            return atp::multi_head_attention(x, layer.attn_weights, config, nullptr, pe.base);
        if (m == "lowrank")
            return atp::multi_head_attention(factorize(), layer.attn_weights, config, nullptr,
                                             pe.base);
        return oracle_attention(factorize(), layer.attn_weights, config, pe.base);
    };

    const Matrix primary = compute(mode);
    if (!g.output.empty()) atp::io::write_matrix(g.output, primary, dtype_of(g));

    nlohmann::json j = {{"mode", mode}, {"rows", primary.rows()}, {"cols", primary.cols()}};
    if (compare) {
        const Matrix standard = mode == "standard" ? primary : compute("standard");
        const Matrix lowrank = mode == "lowrank" ? primary : compute("lowrank");
        const Matrix oracle = mode == "oracle" ? primary : compute("oracle");
        const auto pair_json = [](const Matrix &a, const Matrix &b) {
            return nlohmann::json{{"max_abs", atp::ops::max_abs_diff(a, b)},
                                  {"rel_frobenius", rel_frob(a, b)}};
        };
        j["compare"] = {{"lowrank_vs_oracle", pair_json(lowrank, oracle)},
                        {"standard_vs_oracle", pair_json(standard, oracle)},
                        {"standard_vs_lowrank", pair_json(standard, lowrank)}};
        j["rank"] = factorize().r;
    }
    if (g.format == "csv" && compare) {
        std::string csv = "pair,max_abs,rel_frobenius\n";
        for (const auto &[name, val] : j.at("compare").items())
            csv += name + "," + std::to_string(val.at("max_abs").get<double>()) + "," +
                   std::to_string(val.at("rel_frobenius").get<double>()) + "\n";
        std::cout << csv;
    } else {
        std::cout << j.dump(2) << "\n";
    }
    return 0;
}

// ------------------------------------------------------------------ bench

int cmd_bench(const GlobalOpts &g, const std::vector<std::size_t> &lengths, std::size_t rank,
              const std::vector<std::size_t> &dims, std::size_t repeats,
              std::size_t inner_iters, bool parallel) {
    if (dims.size() != 2) throw atp::invalid_input_error("--dims takes two values: d dp");
    const atp::ScalingReport report =
        atp::scaling_sweep(lengths, rank, dims[0], dims[1], {g.seed}, repeats, inner_iters,
                           parallel, std::nullopt, element_size_of(g));
    if (g.format == "csv") {
        emit(g, atp::bench_report_csv(report));
        return 0;
    }
    // Wall-clock data moves to its own subtree; everything outside "timing"
    // is deterministic under a fixed seed.
    nlohmann::json j = atp::bench_report_json(report);
    nlohmann::json wall = nlohmann::json::array();
    for (auto &run : j.at("runs")) {
        wall.push_back(run.at("wall_ns"));
        run.erase("wall_ns");
    }
    j["timing"] = {{"wall_ns", wall}, {"slopes", j.at("slopes")}};
    j.erase("slopes");
    emit(g, j.dump(2));
    return 0;
}

// -------------------------------------------------------------- gradcheck

struct GradSize {
    std::size_t L, r, dp;
};

GradSize parse_grad_size(const std::string &text) {
    GradSize s{};
    if (std::sscanf(text.c_str(), "%zux%zux%zu", &s.L, &s.r, &s.dp) != 3 || s.L == 0 ||
        s.r == 0 || s.dp == 0 || s.r > s.L)
        throw atp::invalid_input_error("size must be LxRxDP with r <= L, got " + text);
    return s;
}

// Smallest |row denominator| the normalizer would divide by; the epsilon
// guard clamps inside this band and the derivative is locally constant
// there, so a finite-difference mismatch across the clamp is expected.
double min_denominator(const Matrix &q, const Matrix &kp, const Matrix &u,
                       const atp::AttentionConfig &config) {
    if (config.normalizer == atp::Normalizer::softmax_on_scores) return 1.0;
    const double s = config.scale ? 1.0 / std::sqrt(static_cast<double>(q.cols())) : 1.0;
    std::vector<double> row_u(u.cols(), 0.0);
    for (std::size_t i = 0; i < u.rows(); ++i)
        for (std::size_t c = 0; c < u.cols(); ++c) row_u[c] += u(i, c);
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < q.rows(); ++i) {
        double denom = 0.0;
        for (std::size_t c = 0; c < kp.rows(); ++c) {
            double score = row_u[c];
            for (std::size_t t = 0; t < q.cols(); ++t) score += s * q(i, t) * kp(c, t);
            denom += score;
        }
        if (config.normalizer == atp::Normalizer::taylor_denominator) {
            // n_keys + s * q_i . colsum(U * Kp), with colsum(U * Kp) = (1.U) Kp
            denom = static_cast<double>(u.rows());
            std::vector<double> key_sum(q.cols(), 0.0);
            for (std::size_t c = 0; c < kp.rows(); ++c)
                for (std::size_t t = 0; t < q.cols(); ++t) key_sum[t] += row_u[c] * kp(c, t);
            for (std::size_t t = 0; t < q.cols(); ++t) denom += s * q(i, t) * key_sum[t];
        }
        worst = std::min(worst, std::abs(denom));
    }
    return worst;
}

int cmd_gradcheck(const GlobalOpts &g, const std::vector<std::string> &size_strs,
                  std::size_t trials) {
    const double tolerance = 1e-4, step = 1e-5, guard_band = 5e-2;
    std::vector<GradSize> sizes;
    for (const auto &s : size_strs) sizes.push_back(parse_grad_size(s));

    atp::Rng rng(g.seed);
    const auto fill = [&](Matrix &m) { rng.fill_normal(m.data(), m.size()); };

    double worst = 0.0;
    std::size_t checked = 0, guard_reports = 0;
    nlohmann::json failure;
    for (const GradSize &size : sizes) {
        for (std::size_t trial = 0; trial < trials; ++trial) {
            atp::AttentionConfig config;
            config.normalizer = static_cast<atp::Normalizer>(trial % 3);

            // Orthonormal basis from an exact-rank product.
            Matrix a = Matrix::uninit(size.L, size.r), b = Matrix::uninit(size.r, size.r + 2);
            fill(a);
            fill(b);
            const atp::LowRankFactors factors = atp::decompose_input(
                atp::ops::matmul(a, b), atp::RankPolicy::Fixed(size.r), 4, g.seed + trial);

            Matrix q = Matrix::uninit(size.L, size.dp);
            Matrix kp = Matrix::uninit(factors.r, size.dp);
            Matrix vp = Matrix::uninit(factors.r, size.dp);
            Matrix dq = q, dkp = kp, dvp = vp;
            for (Matrix *m : {&q, &kp, &vp, &dq, &dkp, &dvp}) fill(*m);

            const Matrix jvp =
                atp::lowrank_attention_jvp(q, kp, vp, factors.U, dq, dkp, dvp, config);

            const auto shifted = [&](double h) {
                Matrix qs = q, ks = kp, vs = vp;
                for (std::size_t t = 0; t < qs.size(); ++t) qs.data()[t] += h * dq.data()[t];
                for (std::size_t t = 0; t < ks.size(); ++t) ks.data()[t] += h * dkp.data()[t];
                for (std::size_t t = 0; t < vs.size(); ++t) vs.data()[t] += h * dvp.data()[t];
                return atp::lowrank_attention(qs, ks, vs, factors.U, config).output;
            };
            const Matrix plus = shifted(step), minus = shifted(-step);
            Matrix fd = Matrix::uninit(plus.rows(), plus.cols());
            double fd_max = 0.0;
            for (std::size_t t = 0; t < fd.size(); ++t) {
                fd.data()[t] = (plus.data()[t] - minus.data()[t]) / (2.0 * step);
                fd_max = std::max(fd_max, std::abs(fd.data()[t]));
            }
            const double rel = atp::ops::max_abs_diff(jvp, fd) / (1.0 + fd_max);

            if (rel > tolerance &&
                min_denominator(q, kp, factors.U, config) < guard_band) {
                ++guard_reports; // clamp discontinuity, not a derivative defect
                continue;
            }
            ++checked;
            worst = std::max(worst, rel);
            if (rel > tolerance && failure.is_null())
                failure = {{"L", size.L},   {"r", factors.r},
                           {"dp", size.dp}, {"trial", trial},
                           {"rel", rel},    {"normalizer", to_string(config.normalizer)}};
        }
    }

    const bool pass = failure.is_null();
    nlohmann::json j = {{"trials_per_size", trials},
                        {"checked", checked},
                        {"guard_reports", guard_reports},
                        {"worst_rel_error", worst},
                        {"tolerance", tolerance},
                        {"pass", pass}};
    if (!pass) j["failure"] = failure;
    emit(g, j.dump(2));
    if (!pass) {
        std::cerr << "gradcheck exceeded tolerance: " << failure.dump() << "\n";
        return 4;
    }
    return 0;
}

// ------------------------------------------------------------------ synth

int cmd_synth(const GlobalOpts &g, std::size_t count, std::size_t length, std::size_t dim,
              std::size_t rank, double noise) {
    if (g.output.empty())
        throw atp::invalid_input_error("synth needs --output naming the corpus directory");
    atp::SynthSpec spec;
    spec.count = count;
    spec.L = length;
    spec.d = dim;
    spec.intrinsic_rank = rank;
    spec.noise_level = noise;
    spec.seed = g.seed;
    const atp::CorpusManifest manifest = atp::synth_corpus(spec, g.output);
    nlohmann::json j = {{"dir", g.output},
                        {"count", manifest.entries.size()},
                        {"L", length},
                        {"d", dim},
                        {"intrinsic_rank", rank},
                        {"noise_level", noise},
                        {"manifest", (std::filesystem::path(g.output) / "manifest.json").string()}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"low-rank self-attention toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--seed", g.seed, "seed for all randomness")->capture_default_str();
    app.add_option("--precision", g.precision, "element precision for written matrices")
        ->check(CLI::IsMember({"f32", "f64"}))
        ->capture_default_str();
    app.add_option("--output", g.output, "output file (directory for decompose/synth)");
    app.add_option("--format", g.format, "report format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();

    int rc = 0;

    // profile
    std::string manifest_path;
    std::size_t bins = 50;
    std::vector<std::string> buckets;
    auto *profile = app.add_subcommand("profile", "effective-rank profile of a corpus");
    profile->add_option("manifest", manifest_path, "corpus manifest JSON")->required();
    profile->add_option("--bins", bins, "histogram bins")->capture_default_str();
    profile->add_option("--bucket", buckets, "length bucket lo:hi (repeatable)");
    profile->callback([&] { rc = cmd_profile(g, manifest_path, bins, buckets); });

    // decompose
    std::string dec_input, dec_method = "alternating";
    std::size_t dec_rank = 0, dec_inner = 2;
    double dec_fraction = 0.0, dec_entropy_scale = 1.0;
    bool dec_reorth = false;
    auto *decompose = app.add_subcommand("decompose", "low-rank factorization of a matrix");
    decompose->add_option("input", dec_input, "input .matx")->required();
    auto *policy_group = decompose->add_option_group("rank policy");
    auto *opt_rank = policy_group->add_option("--rank", dec_rank, "fixed rank");
    auto *opt_fraction =
        policy_group->add_option("--fraction", dec_fraction, "rank as a fraction of L");
    auto *opt_entropy = policy_group->add_option("--entropy-scale", dec_entropy_scale,
                                                 "entropy effective rank times this scale");
    policy_group->require_option(1);
    decompose->add_option("--method", dec_method, "exact or alternating")
        ->check(CLI::IsMember({"exact", "alternating"}))
        ->capture_default_str();
    decompose->add_flag("--reorthogonalize", dec_reorth, "orthonormalize the basis");
    decompose->add_option("--inner-iters", dec_inner, "alternating rounds per component")
        ->capture_default_str();
    decompose->callback([&] {
        atp::RankPolicy policy = atp::RankPolicy::Fixed(1);
        if (opt_rank->count())
            policy = atp::RankPolicy::Fixed(dec_rank);
        else if (opt_fraction->count())
            policy = atp::RankPolicy::Fraction(dec_fraction);
        else if (opt_entropy->count())
            policy = atp::RankPolicy::Entropy(dec_entropy_scale);
        rc = cmd_decompose(g, dec_input, policy, dec_method, dec_reorth, dec_inner);
    });

    // attend
    std::string att_x, att_weights, att_mode = "lowrank";
    bool att_compare = false;
    std::size_t att_inner = 2;
    auto *attend = app.add_subcommand("attend", "run attention from a weight bundle");
    attend->add_option("input", att_x, "input sequence .matx")->required();
    attend->add_option("weights", att_weights, "layer bundle directory")->required();
    attend->add_option("--mode", att_mode, "standard, lowrank, or oracle")
        ->check(CLI::IsMember({"standard", "lowrank", "oracle"}))
        ->capture_default_str();
    attend->add_flag("--compare", att_compare, "run all modes and report discrepancies");
    attend->add_option("--inner-iters", att_inner, "alternating rounds per component")
        ->capture_default_str();
    attend->callback(
        [&] { rc = cmd_attend(g, att_x, att_weights, att_mode, att_compare, att_inner); });

    // bench
    std::vector<std::size_t> lengths = {512, 1024, 2048, 4096, 8192};
    std::vector<std::size_t> dims = {128, 64};
    std::size_t bench_rank = 128, bench_repeats = 5, bench_inner = 2;
    bool bench_parallel = false;
    auto *bench = app.add_subcommand("bench", "operation-count and wall-time scaling");
    bench->add_option("--lengths", lengths, "ascending sequence lengths")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--rank", bench_rank, "decomposition rank")->capture_default_str();
    bench->add_option("--dims", dims, "model and projection widths: d dp")
        ->delimiter(',')
        ->capture_default_str();
    bench->add_option("--repeats", bench_repeats, "timed repeats per run")
        ->capture_default_str();
    bench->add_option("--inner-iters", bench_inner, "alternating rounds per component")
        ->capture_default_str();
    bench->add_flag("--parallel", bench_parallel, "one thread per run");
    bench->callback([&] {
        rc = cmd_bench(g, lengths, bench_rank, dims, bench_repeats, bench_inner,
                       bench_parallel);
    });

    // gradcheck
    std::vector<std::string> grad_sizes = {"8x4x8", "12x6x12", "16x8x16"};
    std::size_t grad_trials = 20;
    auto *gradcheck =
        app.add_subcommand("gradcheck", "analytic vs finite-difference derivatives");
    gradcheck->add_option("--sizes", grad_sizes, "sizes as LxRxDP")
        ->delimiter(',')
        ->capture_default_str();
    gradcheck->add_option("--trials", grad_trials, "trials per size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    gradcheck->callback([&] { rc = cmd_gradcheck(g, grad_sizes, grad_trials); });

    // synth
    std::size_t syn_count = 16, syn_length = 64, syn_dim = 32, syn_rank = 4;
    double syn_noise = 0.0;
    auto *synth = app.add_subcommand("synth", "generate a synthetic low-rank corpus");
    synth->add_option("--count", syn_count, "sequences to generate")->capture_default_str();
    synth->add_option("--length", syn_length, "rows per sequence")->capture_default_str();
    synth->add_option("--dim", syn_dim, "columns per sequence")->capture_default_str();
    synth->add_option("--rank", syn_rank, "intrinsic rank")->capture_default_str();
    synth->add_option("--noise", syn_noise, "noise level")->capture_default_str();
    synth->callback(
        [&] { rc = cmd_synth(g, syn_count, syn_length, syn_dim, syn_rank, syn_noise); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const atp::memory_budget_error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const atp::error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
