#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "atp/errors.hpp"

namespace atp {

// Dense row-major matrix of doubles. Entries are validated finite on
// construction from external data; internal compute paths build through
// uninit() and fill in results that are finite by construction.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
        check_shape(rows, cols);
    }

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        check_shape(rows, cols);
        if (data_.size() != rows * cols)
            throw invalid_input_error("matrix data length " + std::to_string(data_.size()) +
                                      " does not match " + std::to_string(rows) + "x" +
                                      std::to_string(cols));
        for (std::size_t i = 0; i < data_.size(); ++i)
            if (!std::isfinite(data_[i]))
                throw invalid_input_error("non-finite matrix entry at flat index " +
                                          std::to_string(i));
    }

    // Allocates without zero-fill or validation; caller writes every entry.
    static Matrix uninit(std::size_t rows, std::size_t cols) {
        check_shape(rows, cols);
        Matrix m;
        m.rows_ = rows;
        m.cols_ = cols;
        m.data_.resize(rows * cols);
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double &operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double *data() { return data_.data(); }
    const double *data() const { return data_.data(); }
    double *row(std::size_t i) { return data_.data() + i * cols_; }
    const double *row(std::size_t i) const { return data_.data() + i * cols_; }

    const std::vector<double> &values() const { return data_; }

    bool same_shape(const Matrix &other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    static void check_shape(std::size_t rows, std::size_t cols) {
        if (rows == 0 || cols == 0)
            throw invalid_input_error("matrix dimensions must be positive");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

} // namespace atp
