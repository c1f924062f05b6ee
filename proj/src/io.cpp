#include "atp/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace atp::io {

namespace {

constexpr std::size_t kMaxCsvEntries = 1000000;
constexpr unsigned char kMagic[4] = {0x4D, 0x41, 0x54, 0x58}; // "MATX"
constexpr unsigned char kVersion = 1;

[[noreturn]] void fail(const std::filesystem::path &path, const std::string &what) {
    throw invalid_input_error(path.string() + ": " + what);
}

std::uint64_t decode_u64(const unsigned char *p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void encode_u64(std::uint64_t v, unsigned char *p) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

double decode_value(const unsigned char *p, Dtype dtype) {
    if (dtype == Dtype::f32) {
        std::uint32_t bits = 0;
        for (int i = 3; i >= 0; --i) bits = (bits << 8) | p[i];
        float f;
        std::memcpy(&f, &bits, sizeof f);
        return static_cast<double>(f);
    }
    std::uint64_t bits = decode_u64(p);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
}

void encode_value(double v, unsigned char *p, Dtype dtype) {
    if (dtype == Dtype::f32) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(bits >> (8 * i));
        return;
    }
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    encode_u64(bits, p);
}

} // namespace

Matrix read_matx(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open for reading");

    unsigned char header[24];
    if (!in.read(reinterpret_cast<char *>(header), sizeof header))
        fail(path, "truncated header");
    if (std::memcmp(header, kMagic, 4) != 0) fail(path, "bad magic, not a MATX file");
    if (header[4] != kVersion)
        fail(path, "unsupported version " + std::to_string(header[4]));
    if (header[5] != 1 && header[5] != 2)
        fail(path, "unsupported dtype " + std::to_string(header[5]));
    if (header[6] != 0 || header[7] != 0) fail(path, "reserved header bytes not zero");

    const auto dtype = static_cast<Dtype>(header[5]);
    const std::uint64_t rows = decode_u64(header + 8);
    const std::uint64_t cols = decode_u64(header + 16);
    if (rows == 0 || cols == 0) fail(path, "zero dimension in header");
    const std::size_t value_size = dtype == Dtype::f32 ? 4 : 8;
    if (cols != 0 && rows > SIZE_MAX / cols / value_size)
        fail(path, "dimensions overflow addressable size");

    const std::size_t count = static_cast<std::size_t>(rows * cols);
    std::vector<unsigned char> payload(count * value_size);
    if (!in.read(reinterpret_cast<char *>(payload.data()),
                 static_cast<std::streamsize>(payload.size())))
        fail(path, "truncated payload");

    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i)
        values[i] = decode_value(payload.data() + i * value_size, dtype);
    try {
        return Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                      std::move(values));
    } catch (const invalid_input_error &e) {
        fail(path, e.what());
    }
}

void write_matx(const std::filesystem::path &path, const Matrix &m, Dtype dtype) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(path, "cannot open for writing");

    unsigned char header[24] = {};
    std::memcpy(header, kMagic, 4);
    header[4] = kVersion;
    header[5] = static_cast<unsigned char>(dtype);
    encode_u64(m.rows(), header + 8);
    encode_u64(m.cols(), header + 16);
    out.write(reinterpret_cast<const char *>(header), sizeof header);

    const std::size_t value_size = dtype == Dtype::f32 ? 4 : 8;
    std::vector<unsigned char> payload(m.size() * value_size);
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double v = m.data()[i];
        if (dtype == Dtype::f32 && !std::isfinite(static_cast<double>(static_cast<float>(v))))
            fail(path, "value at flat index " + std::to_string(i) +
                           " does not fit 32-bit float");
        encode_value(v, payload.data() + i * value_size, dtype);
    }
    out.write(reinterpret_cast<const char *>(payload.data()),
              static_cast<std::streamsize>(payload.size()));
    if (!out) fail(path, "write failed");
}

Matrix read_csv(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open for reading");

    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t row_cols = 0;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            const std::string field = line.substr(pos, comma - pos);
            std::size_t used = 0;
            double v;
            try {
                v = std::stod(field, &used);
            } catch (const std::exception &) {
                fail(path, "unparseable value '" + field + "' on line " +
                               std::to_string(rows + 1));
            }
            while (used < field.size() &&
                   (field[used] == ' ' || field[used] == '\t'))
                ++used;
            if (used != field.size())
                fail(path, "trailing junk in value '" + field + "' on line " +
                               std::to_string(rows + 1));
            values.push_back(v);
            ++row_cols;
            if (values.size() > kMaxCsvEntries)
                fail(path, "CSV exceeds 10^6 entries");
            pos = comma + 1;
            if (comma == line.size()) break;
        }
        if (rows == 0)
            cols = row_cols;
        else if (row_cols != cols)
            fail(path, "ragged row " + std::to_string(rows + 1) + ": expected " +
                           std::to_string(cols) + " values, got " +
                           std::to_string(row_cols));
        ++rows;
    }
    if (rows == 0) fail(path, "no data rows");
    try {
        return Matrix(rows, cols, std::move(values));
    } catch (const invalid_input_error &e) {
        fail(path, e.what());
    }
}

void write_csv(const std::filesystem::path &path, const Matrix &m) {
    if (m.size() > kMaxCsvEntries)
        fail(path, "matrix exceeds the 10^6 entry CSV limit, use MATX");
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(path, "cannot open for writing");
    std::ostringstream buf;
    buf.precision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) buf << ',';
            buf << m(i, j);
        }
        buf << '\n';
    }
    out << buf.str();
    if (!out) fail(path, "write failed");
}

Matrix read_matrix(const std::filesystem::path &path) {
    if (path.extension() == ".csv") return read_csv(path);
    return read_matx(path);
}

void write_matrix(const std::filesystem::path &path, const Matrix &m, Dtype dtype) {
    if (path.extension() == ".csv") {
        write_csv(path, m);
        return;
    }
    write_matx(path, m, dtype);
}

} // namespace atp::io
