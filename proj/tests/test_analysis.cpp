#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "atp/analysis.hpp"
#include "atp/errors.hpp"
#include "atp/io.hpp"
#include "atp/ops.hpp"
#include "atp/rng.hpp"

using atp::CorpusManifest;
using atp::Matrix;
using atp::ProfileReport;
using atp::SynthSpec;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const char *tag) {
        path = std::filesystem::temp_directory_path() /
               (std::string("atp_analysis_") + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

double median_ratio(const ProfileReport &report,
                    std::size_t lo = 0, std::size_t hi = SIZE_MAX) {
    std::vector<double> ratios;
    for (const auto &r : report.records)
        if (r.length >= lo && r.length < hi) ratios.push_back(r.ratio);
    REQUIRE(!ratios.empty());
    std::sort(ratios.begin(), ratios.end());
    return ratios[ratios.size() / 2];
}

double histogram_integral(const atp::RatioHistogram &h) {
    double total = 0.0;
    for (std::size_t b = 0; b < h.densities.size(); ++b)
        total += h.densities[b] * (h.edges[b + 1] - h.edges[b]);
    return total;
}

std::string file_bytes(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("energy curve of a two-value spectrum reads off the squared values") {
    Matrix x(2, 2, {4.0, 0.0, 0.0, 3.0});
    auto curve = atp::energy_curve(x, {0.5, 1.0});
    REQUIRE(curve.size() == 2);
    CHECK(curve[0].first == 0.5);
    CHECK(curve[0].second == doctest::Approx(16.0 / 25.0).epsilon(1e-10));
    CHECK(curve[1].second == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("energy curve is non-decreasing and ends at one") {
    atp::Rng rng(7);
    Matrix x = Matrix::uninit(10, 8);
    rng.fill_normal(x.data(), x.size());
    std::vector<double> fractions;
    for (int i = 1; i <= 10; ++i) fractions.push_back(0.1 * i);
    fractions.back() = 1.0;
    auto curve = atp::energy_curve(x, fractions);
    double prev = 0.0;
    for (const auto &[f, ratio] : curve) {
        CHECK(ratio >= prev - 1e-12);
        CHECK(ratio <= 1.0 + 1e-12);
        prev = ratio;
    }
    CHECK(std::abs(curve.back().second - 1.0) < 1e-10);
}

TEST_CASE("rank-one input captures all energy at every fraction") {
    atp::Rng rng(8);
    Matrix u = Matrix::uninit(9, 1), v = Matrix::uninit(1, 6);
    rng.fill_normal(u.data(), u.size());
    rng.fill_normal(v.data(), v.size());
    Matrix x = atp::ops::matmul(u, v);
    for (const auto &[f, ratio] : atp::energy_curve(x, {0.2, 0.6, 1.0}))
        CHECK(ratio == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("energy curve input validation") {
    Matrix zero(3, 3);
    CHECK_THROWS_AS(atp::energy_curve(zero, {1.0}), atp::degenerate_input_error);
    Matrix x(2, 2, {1.0, 0.0, 0.0, 1.0});
    CHECK_THROWS_AS(atp::energy_curve(x, {}), atp::invalid_input_error);
    CHECK_THROWS_AS(atp::energy_curve(x, {0.5, 0.25}), atp::invalid_input_error);
    CHECK_THROWS_AS(atp::energy_curve(x, {0.0, 1.0}), atp::invalid_input_error);
    CHECK_THROWS_AS(atp::energy_curve(x, {0.5, 1.5}), atp::invalid_input_error);
}

TEST_CASE("noiseless synthetic corpus profiles at the intrinsic rank") {
    TempDir dir("noiseless");
    SynthSpec spec;
    spec.count = 8;
    spec.L = 24;
    spec.d = 16;
    spec.intrinsic_rank = 4;
    spec.seed = 31;
    CorpusManifest manifest = atp::synth_corpus(spec, dir.path.string());
    REQUIRE(manifest.entries.size() == 8);
    ProfileReport report = atp::profile_corpus(manifest);
    CHECK(report.errors.empty());
    REQUIRE(report.records.size() == 8);
    const double want = 4.0 / 24.0;
    for (const auto &r : report.records) {
        CHECK(r.effective_rank <= 4);
        CHECK(std::abs(r.ratio - want) <= 1.0 / 24.0 + 1e-12);
    }
}

TEST_CASE("synthetic generation is byte-deterministic") {
    TempDir a("det_a"), b("det_b");
    SynthSpec spec;
    spec.count = 3;
    spec.L = 10;
    spec.d = 7;
    spec.intrinsic_rank = 2;
    spec.noise_level = 0.25;
    spec.seed = 99;
    atp::synth_corpus(spec, a.path.string());
    atp::synth_corpus(spec, b.path.string());
    for (const char *name : {"seq_0000.matx", "seq_0001.matx", "seq_0002.matx",
                             "manifest.json"}) {
        CHECK(file_bytes(a.path / name) == file_bytes(b.path / name));
        CHECK(!file_bytes(a.path / name).empty());
    }
}

TEST_CASE("empty synthetic corpus is rejected downstream") {
    TempDir dir("empty");
    SynthSpec spec;
    spec.count = 0;
    CorpusManifest manifest = atp::synth_corpus(spec, dir.path.string());
    CHECK(manifest.entries.empty());
    CHECK(std::filesystem::exists(dir.path / "manifest.json"));
    CHECK_THROWS_AS(atp::profile_corpus(manifest), atp::invalid_input_error);
}

TEST_CASE("synthetic spec validation") {
    TempDir dir("badspec");
    SynthSpec spec;
    spec.count = 1;
    spec.L = 8;
    spec.d = 4;
    spec.intrinsic_rank = 5; // above min(L, d)
    CHECK_THROWS_AS(atp::synth_corpus(spec, dir.path.string()), atp::invalid_input_error);
    spec.intrinsic_rank = 2;
    spec.noise_level = -0.1;
    CHECK_THROWS_AS(atp::synth_corpus(spec, dir.path.string()), atp::invalid_input_error);
}

TEST_CASE("profiling is independent of manifest order") {
    TempDir dir("order");
    SynthSpec spec;
    spec.count = 6;
    spec.L = 12;
    spec.d = 9;
    spec.intrinsic_rank = 3;
    spec.noise_level = 0.1;
    spec.seed = 5;
    CorpusManifest manifest = atp::synth_corpus(spec, dir.path.string());
    CorpusManifest shuffled = manifest;
    std::shuffle(shuffled.entries.begin(), shuffled.entries.end(), std::mt19937(1234));
    const auto a = atp::profile_report_json(atp::profile_corpus(manifest));
    const auto b = atp::profile_report_json(atp::profile_corpus(shuffled));
    CHECK(a == b);
}

TEST_CASE("unreadable entries become error records and profiling continues") {
    TempDir dir("partial");
    atp::Rng rng(3);
    Matrix good = Matrix::uninit(6, 4);
    rng.fill_normal(good.data(), good.size());
    atp::io::write_matx((dir.path / "good.matx").string(), good);
    Matrix short_one = Matrix::uninit(4, 4);
    rng.fill_normal(short_one.data(), short_one.size());
    atp::io::write_matx((dir.path / "short.matx").string(), short_one);

    CorpusManifest manifest;
    manifest.entries.push_back({(dir.path / "good.matx").string(), 6, ""});
    manifest.entries.push_back({(dir.path / "missing.matx").string(), 6, ""});
    manifest.entries.push_back({(dir.path / "short.matx").string(), 6, ""}); // wrong length
    ProfileReport report = atp::profile_corpus(manifest);
    CHECK(report.records.size() == 1);
    CHECK(report.errors.size() == 2);
    REQUIRE(report.histograms.size() == 1);
    CHECK(report.histograms[0].count == 1);
}

TEST_CASE("rank-one corpus produces a unit-mass spike") {
    TempDir dir("spike");
    SynthSpec spec;
    spec.count = 6;
    spec.L = 20;
    spec.d = 10;
    spec.intrinsic_rank = 1;
    spec.seed = 77;
    ProfileReport report = atp::profile_corpus(atp::synth_corpus(spec, dir.path.string()));
    for (const auto &r : report.records) {
        CHECK(r.effective_rank == 1);
        CHECK(r.ratio == doctest::Approx(1.0 / 20.0).epsilon(1e-12));
    }
    REQUIRE(report.histograms.size() == 1);
    const auto &h = report.histograms[0];
    CHECK(histogram_integral(h) == doctest::Approx(1.0).epsilon(1e-6));
    std::size_t occupied = 0;
    for (double d : h.densities) occupied += d > 0.0 ? 1 : 0;
    CHECK(occupied == 1);
}

TEST_CASE("full-spectrum square matrices profile near ratio one") {
    TempDir dir("flat");
    atp::Rng rng(13);
    CorpusManifest manifest;
    for (int i = 0; i < 8; ++i) {
        Matrix x = Matrix::uninit(24, 24);
        rng.fill_normal(x.data(), x.size());
        const auto path = dir.path / ("g" + std::to_string(i) + ".matx");
        atp::io::write_matx(path.string(), x);
        manifest.entries.push_back({path.string(), 24, ""});
    }
    ProfileReport report = atp::profile_corpus(manifest);
    for (const auto &r : report.records) {
        CHECK(r.ratio > 0.4);
        CHECK(r.ratio <= 1.0);
    }
    CHECK(median_ratio(report) > 0.5);
}

TEST_CASE("all profiled ratios lie in (0, 1]") {
    TempDir dir("range");
    SynthSpec spec;
    spec.count = 10;
    spec.L = 16;
    spec.d = 16;
    spec.intrinsic_rank = 8;
    spec.noise_level = 0.3;
    spec.seed = 41;
    ProfileReport report = atp::profile_corpus(atp::synth_corpus(spec, dir.path.string()));
    for (const auto &r : report.records) {
        CHECK(r.ratio > 0.0);
        CHECK(r.ratio <= 1.0);
    }
}

TEST_CASE("median ratio grows with the noise level") {
    double prev = -1.0;
    for (double noise : {0.0, 0.1, 0.4}) {
        TempDir dir("noise");
        SynthSpec spec;
        spec.count = 12;
        spec.L = 24;
        spec.d = 16;
        spec.intrinsic_rank = 4;
        spec.noise_level = noise;
        spec.seed = 17;
        ProfileReport report = atp::profile_corpus(atp::synth_corpus(spec, dir.path.string()));
        const double med = median_ratio(report);
        CHECK(med >= prev);
        prev = med;
    }
}

TEST_CASE("longer sequences at fixed intrinsic rank are more low-rank") {
    TempDir dir("length");
    CorpusManifest merged;
    for (std::size_t L : {16u, 32u, 64u}) {
        SynthSpec spec;
        spec.count = 10;
        spec.L = L;
        spec.d = 16;
        spec.intrinsic_rank = 4;
        spec.noise_level = 0.05;
        spec.seed = 100 + L;
        CorpusManifest part =
            atp::synth_corpus(spec, (dir.path / std::to_string(L)).string());
        merged.entries.insert(merged.entries.end(), part.entries.begin(), part.entries.end());
        merged.bins.push_back({L, L + 1});
    }
    ProfileReport report = atp::profile_corpus(merged);
    CHECK(report.histograms.size() == 3);
    double prev = 1e300;
    for (std::size_t L : {16u, 32u, 64u}) {
        const double med = median_ratio(report, L, L + 1);
        CHECK(med < prev);
        prev = med;
    }
}

TEST_CASE("histograms integrate to one with configurable bins") {
    TempDir dir("bins");
    SynthSpec spec;
    spec.count = 9;
    spec.L = 14;
    spec.d = 12;
    spec.intrinsic_rank = 5;
    spec.noise_level = 0.2;
    spec.seed = 23;
    CorpusManifest manifest = atp::synth_corpus(spec, dir.path.string());
    for (std::size_t bins : {50u, 10u, 1u}) {
        ProfileReport report = atp::profile_corpus(manifest, bins);
        REQUIRE(report.histograms.size() == 1);
        const auto &h = report.histograms[0];
        CHECK(h.edges.size() == bins + 1);
        CHECK(h.densities.size() == bins);
        for (double d : h.densities) CHECK(d >= 0.0);
        for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) CHECK(h.edges[b] < h.edges[b + 1]);
        CHECK(histogram_integral(h) == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK_THROWS_AS(atp::profile_corpus(manifest, 0), atp::invalid_input_error);
}

TEST_CASE("manifest JSON round-trips with labels and bins") {
    TempDir dir("roundtrip");
    SynthSpec spec;
    spec.count = 2;
    spec.L = 8;
    spec.d = 6;
    spec.intrinsic_rank = 2;
    spec.seed = 55;
    CorpusManifest resolved = atp::synth_corpus(spec, dir.path.string());
    CorpusManifest loaded = atp::load_manifest((dir.path / "manifest.json").string());
    REQUIRE(loaded.entries.size() == resolved.entries.size());
    for (std::size_t i = 0; i < loaded.entries.size(); ++i) {
        // relative paths resolve against the manifest's directory
        CHECK(std::filesystem::path(loaded.entries[i].path).is_absolute() ==
              std::filesystem::path(resolved.entries[i].path).is_absolute());
        CHECK(std::filesystem::equivalent(loaded.entries[i].path, resolved.entries[i].path));
        CHECK(loaded.entries[i].length == resolved.entries[i].length);
        CHECK(loaded.entries[i].label == "synth");
    }
    REQUIRE(loaded.bins.size() == 1);
    CHECK(loaded.bins[0].lo == 8);
    CHECK(loaded.bins[0].hi == 9);
    CHECK_THROWS_AS(atp::load_manifest((dir.path / "nope.json").string()),
                    atp::invalid_input_error);
}

TEST_CASE("report CSV lists bin centers and densities per bucket") {
    TempDir dir("csv");
    SynthSpec spec;
    spec.count = 4;
    spec.L = 10;
    spec.d = 8;
    spec.intrinsic_rank = 3;
    spec.noise_level = 0.15;
    spec.seed = 67;
    ProfileReport report = atp::profile_corpus(atp::synth_corpus(spec, dir.path.string()), 5);
    const std::string csv = atp::profile_report_csv(report);
    CHECK(csv.find("# bucket 10 11\n") != std::string::npos);
    CHECK(csv.find("bin,density\n") != std::string::npos);
    // five data rows for the single bucket
    std::size_t commas = 0;
    for (char c : csv) commas += c == ',' ? 1 : 0;
    CHECK(commas == 6); // header plus five rows

    const auto j = atp::profile_report_json(report);
    CHECK(j.at("records").size() == 4);
    CHECK(j.at("histograms").size() == 1);
    CHECK(j.at("errors").empty());
}
