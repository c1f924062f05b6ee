#include "atp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "atp/entropy.hpp"
#include "atp/errors.hpp"
#include "atp/io.hpp"
#include "atp/kernels.hpp"
#include "atp/lowrank.hpp"
#include "atp/ops.hpp"
#include "atp/rng.hpp"
#include "atp/svd.hpp"

namespace fs = std::filesystem;

namespace atp {

CorpusManifest load_manifest(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw invalid_input_error("cannot open manifest " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw invalid_input_error(path + ": " + e.what());
    }
    CorpusManifest m;
    const fs::path base = fs::path(path).parent_path();
    try {
        for (const auto &e : j.at("entries")) {
            ManifestEntry entry;
            entry.path = e.at("path").get<std::string>();
            if (fs::path(entry.path).is_relative())
                entry.path = (base / entry.path).string();
            entry.length = e.at("length").get<std::size_t>();
            if (e.contains("label")) entry.label = e.at("label").get<std::string>();
            m.entries.push_back(std::move(entry));
        }
        if (j.contains("bins"))
            for (const auto &b : j.at("bins"))
                m.bins.push_back({b.at("lo").get<std::size_t>(), b.at("hi").get<std::size_t>()});
    } catch (const nlohmann::json::exception &e) {
        throw invalid_input_error(path + ": " + e.what());
    }
    return m;
}

void save_manifest(const std::string &path, const CorpusManifest &manifest) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto &e : manifest.entries) {
        nlohmann::json je{{"path", e.path}, {"length", e.length}};
        if (!e.label.empty()) je["label"] = e.label;
        entries.push_back(std::move(je));
    }
    nlohmann::json bins = nlohmann::json::array();
    for (const auto &b : manifest.bins) bins.push_back({{"lo", b.lo}, {"hi", b.hi}});
    nlohmann::json j{{"entries", std::move(entries)}, {"bins", std::move(bins)}};
    std::ofstream out(path);
    if (!out) throw invalid_input_error("cannot write manifest " + path);
    out << j.dump(2) << "\n";
}

namespace {

RatioHistogram make_histogram(const LengthBin &bucket, std::vector<double> ratios,
                              std::size_t bin_count) {
    RatioHistogram h;
    h.bucket = bucket;
    h.count = ratios.size();
    double lo = *std::min_element(ratios.begin(), ratios.end());
    double hi = *std::max_element(ratios.begin(), ratios.end());
    if (hi <= lo) {
        // single spike: widen symmetrically so densities stay finite
        const double pad = std::max(1e-12, std::abs(lo) * 1e-9);
        lo -= pad;
        hi += pad;
    }
    const double width = (hi - lo) / static_cast<double>(bin_count);
    h.edges.resize(bin_count + 1);
    for (std::size_t b = 0; b <= bin_count; ++b)
        h.edges[b] = lo + width * static_cast<double>(b);
    h.edges.back() = hi;
    std::vector<std::size_t> counts(bin_count, 0);
    for (double r : ratios) {
        auto b = static_cast<std::size_t>((r - lo) / width);
        counts[std::min(b, bin_count - 1)] += 1;
    }
    h.densities.resize(bin_count);
    const double norm = width * static_cast<double>(ratios.size());
    for (std::size_t b = 0; b < bin_count; ++b)
        h.densities[b] = static_cast<double>(counts[b]) / norm;
    return h;
}

} // namespace

ProfileReport profile_corpus(const CorpusManifest &manifest, std::size_t bin_count) {
    if (manifest.entries.empty()) throw invalid_input_error("manifest lists no sequences");
    if (bin_count == 0) throw invalid_input_error("histogram needs at least one bin");
    ProfileReport report;
    for (const auto &entry : manifest.entries) {
        try {
            Matrix x = io::read_matrix(entry.path);
            if (x.rows() != entry.length)
                throw invalid_input_error("expected " + std::to_string(entry.length) +
                                          " rows, file has " + std::to_string(x.rows()));
            const EntropyReport er =
                svd_entropy(exact_svd(x).singular_values, x.rows());
            report.records.push_back(
                {entry.path, x.rows(), er.mu, er.effective_rank, er.ratio});
        } catch (const error &e) {
            report.errors.push_back({entry.path, e.what()});
        }
    }
    auto by_path = [](const auto &a, const auto &b) { return a.path < b.path; };
    std::stable_sort(report.records.begin(), report.records.end(), by_path);
    std::stable_sort(report.errors.begin(), report.errors.end(), by_path);
    if (report.records.empty()) return report;

    std::vector<LengthBin> bins = manifest.bins;
    if (bins.empty()) {
        std::size_t lo = report.records.front().length, hi = lo;
        for (const auto &r : report.records) {
            lo = std::min(lo, r.length);
            hi = std::max(hi, r.length);
        }
        bins.push_back({lo, hi + 1});
    }
    for (const auto &bucket : bins) {
        std::vector<double> ratios;
        for (const auto &r : report.records)
            if (r.length >= bucket.lo && r.length < bucket.hi) ratios.push_back(r.ratio);
        if (!ratios.empty())
            report.histograms.push_back(make_histogram(bucket, std::move(ratios), bin_count));
    }
    return report;
}

nlohmann::json profile_report_json(const ProfileReport &report) {
    nlohmann::json records = nlohmann::json::array();
    for (const auto &r : report.records)
        records.push_back({{"path", r.path},
                           {"length", r.length},
                           {"mu", r.mu},
                           {"effective_rank", r.effective_rank},
                           {"ratio", r.ratio}});
    nlohmann::json errors = nlohmann::json::array();
    for (const auto &e : report.errors)
        errors.push_back({{"path", e.path}, {"message", e.message}});
    nlohmann::json histograms = nlohmann::json::array();
    for (const auto &h : report.histograms)
        histograms.push_back({{"bucket", {{"lo", h.bucket.lo}, {"hi", h.bucket.hi}}},
                              {"edges", h.edges},
                              {"densities", h.densities},
                              {"count", h.count}});
    return {{"records", std::move(records)},
            {"errors", std::move(errors)},
            {"histograms", std::move(histograms)}};
}

std::string profile_report_csv(const ProfileReport &report) {
    std::ostringstream out;
    out.precision(17);
    for (const auto &h : report.histograms) {
        out << "# bucket " << h.bucket.lo << " " << h.bucket.hi << "\n";
        out << "bin,density\n";
        for (std::size_t b = 0; b < h.densities.size(); ++b)
            out << 0.5 * (h.edges[b] + h.edges[b + 1]) << "," << h.densities[b] << "\n";
    }
    return out.str();
}

std::vector<std::pair<double, double>> energy_curve(const Matrix &x,
                                                    const std::vector<double> &fractions) {
    if (fractions.empty()) throw invalid_input_error("energy curve needs fractions");
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        if (!(fractions[i] > 0.0) || fractions[i] > 1.0)
            throw invalid_input_error("fractions must lie in (0, 1]");
        if (i > 0 && fractions[i] < fractions[i - 1])
            throw invalid_input_error("fractions must be ascending");
    }
    if (ops::frob_norm(x) == 0.0)
        throw degenerate_input_error("zero matrix has no energy curve");
    const SvdResult svd = exact_svd(x);
    const std::size_t full = std::min(x.rows(), x.cols());
    std::vector<std::pair<double, double>> curve;
    curve.reserve(fractions.size());
    for (double f : fractions) {
        const std::size_t r =
            std::min(full, std::max<std::size_t>(1, guarded_ceil(f * static_cast<double>(full))));
        curve.emplace_back(f, energy_ratio(x, exact_truncate(svd, r)));
    }
    return curve;
}

CorpusManifest synth_corpus(const SynthSpec &spec, const std::string &out_dir) {
    if (spec.count > 0) {
        if (spec.L == 0 || spec.d == 0)
            throw invalid_input_error("synthetic sequences need positive dimensions");
        if (spec.intrinsic_rank == 0 || spec.intrinsic_rank > std::min(spec.L, spec.d))
            throw invalid_input_error("intrinsic rank must lie in [1, min(L, d)]");
        if (spec.noise_level < 0.0) throw invalid_input_error("noise level must be >= 0");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw invalid_input_error("cannot create " + out_dir + ": " + ec.message());

    CorpusManifest on_disk; // relative paths, as written to manifest.json
    CorpusManifest resolved;
    Rng rng(spec.seed);
    for (std::size_t i = 0; i < spec.count; ++i) {
        Matrix a = Matrix::uninit(spec.L, spec.intrinsic_rank);
        rng.fill_normal(a.data(), a.size());
        Matrix b = Matrix::uninit(spec.intrinsic_rank, spec.d);
        rng.fill_normal(b.data(), b.size());
        Matrix x = ops::matmul(a, b);
        if (spec.noise_level > 0.0) {
            Matrix n = Matrix::uninit(spec.L, spec.d);
            rng.fill_normal(n.data(), n.size());
            kernels::axpy(spec.noise_level, n.data(), x.data(), x.size());
        }
        char name[32];
        std::snprintf(name, sizeof name, "seq_%04zu.matx", i);
        const fs::path file = fs::path(out_dir) / name;
        try {
            io::write_matx(file.string(), x);
        } catch (const error &e) {
            throw invalid_input_error(std::string("writing ") + file.string() + ": " + e.what());
        }
        on_disk.entries.push_back({name, spec.L, "synth"});
        resolved.entries.push_back({file.string(), spec.L, "synth"});
    }
    if (spec.count > 0) {
        on_disk.bins.push_back({spec.L, spec.L + 1});
        resolved.bins = on_disk.bins;
    }
    save_manifest((fs::path(out_dir) / "manifest.json").string(), on_disk);
    return resolved;
}

} // namespace atp
