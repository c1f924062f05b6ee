#pragma once

#include <filesystem>

#include "atp/matrix.hpp"

namespace atp::io {

// Element type tag stored in a MATX header.
enum class Dtype : unsigned char { f32 = 1, f64 = 2 };

// MATX container: "MATX" magic, version byte (1), dtype byte, two reserved
// zero bytes, then rows and cols as little-endian u64, then the row-major
// payload in little-endian order.
Matrix read_matx(const std::filesystem::path &path);
void write_matx(const std::filesystem::path &path, const Matrix &m, Dtype dtype = Dtype::f64);

// Plain decimal CSV, one row per line; accepted up to 10^6 entries.
Matrix read_csv(const std::filesystem::path &path);
void write_csv(const std::filesystem::path &path, const Matrix &m);

// Extension dispatch: ".csv" goes through the CSV reader/writer, everything
// else is treated as MATX.
Matrix read_matrix(const std::filesystem::path &path);
void write_matrix(const std::filesystem::path &path, const Matrix &m, Dtype dtype = Dtype::f64);

} // namespace atp::io
