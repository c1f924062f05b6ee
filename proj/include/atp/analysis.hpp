#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "atp/matrix.hpp"

namespace atp {

struct ManifestEntry {
    std::string path;
    std::size_t length = 0; // expected row count of the referenced matrix
    std::string label;
};

// Half-open sequence-length interval [lo, hi).
struct LengthBin {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

struct CorpusManifest {
    std::vector<ManifestEntry> entries;
    std::vector<LengthBin> bins; // empty means one bucket spanning the corpus
};

CorpusManifest load_manifest(const std::string &path);
void save_manifest(const std::string &path, const CorpusManifest &manifest);

struct SequenceRecord {
    std::string path;
    std::size_t length = 0;
    double mu = 0.0;
    std::size_t effective_rank = 0;
    double ratio = 0.0; // effective_rank / length
};

struct SequenceError {
    std::string path;
    std::string message;
};

// Equal-width probability-density histogram of the ratios observed in one
// length bucket. A degenerate observed range (all ratios equal) is widened
// symmetrically so the spike still integrates to one.
struct RatioHistogram {
    LengthBin bucket;
    std::vector<double> edges;     // bin_count + 1 ascending
    std::vector<double> densities; // bin_count, integrates to 1
    std::size_t count = 0;         // sequences in the bucket
};

struct ProfileReport {
    std::vector<SequenceRecord> records; // sorted by path
    std::vector<SequenceError> errors;   // unreadable or mis-sized entries
    std::vector<RatioHistogram> histograms;
};

// Per sequence: exact spectrum, entropy summary, ratio; then one density
// histogram per length bucket. Unreadable entries become error records and
// profiling continues; an entryless manifest is an error.
ProfileReport profile_corpus(const CorpusManifest &manifest, std::size_t bin_count = 50);

nlohmann::json profile_report_json(const ProfileReport &report);
// Per-bucket blocks of "bin,density" rows (bin = center), each preceded by a
// "# bucket lo hi" comment line.
std::string profile_report_csv(const ProfileReport &report);

// Captured-energy curve from exact truncations at r = max(1, ceil(f*min(L,d)))
// per fraction. Fractions must be ascending within (0, 1].
std::vector<std::pair<double, double>> energy_curve(const Matrix &x,
                                                    const std::vector<double> &fractions);

struct SynthSpec {
    std::size_t count = 0;
    std::size_t L = 0;
    std::size_t d = 0;
    std::size_t intrinsic_rank = 0;
    double noise_level = 0.0;
    std::uint64_t seed = 0;
};

// Writes `count` seeded matrices A*B + noise_level*N under out_dir along
// with manifest.json (relative paths), and returns the manifest with
// resolved paths.
CorpusManifest synth_corpus(const SynthSpec &spec, const std::string &out_dir);

} // namespace atp
