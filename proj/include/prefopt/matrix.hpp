#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace prefopt {

/// Dense row-major matrix of doubles. Small and value-semantic; all the
/// tables in this project are desk scale, so no linear-algebra library
/// is pulled in.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, 0.0); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool operator==(const Matrix& other) const = default;

    double frobenius_norm() const {
        double s = 0.0;
        for (double v : data_) s += v * v;
        return std::sqrt(s);
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Pairwise (cascade) summation; order-independent reductions to ~1e-16
/// relative, used for every batch mean in the loss and metric paths.
double pairwise_sum(std::span<const double> values);

inline double pairwise_mean(std::span<const double> values) {
    return values.empty() ? 0.0 : pairwise_sum(values) / static_cast<double>(values.size());
}

}  // namespace prefopt
