#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace turntaking {

using Vector = std::vector<double>;

// Thrown for structural problems: bad dimensions, invalid configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown for malformed or inconsistent input data (CSV rows, orderings).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when a computation produces NaN/Inf or otherwise diverges.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    const double* row(std::size_t r) const { return values.data() + r * cols; }
    double* row(std::size_t r) { return values.data() + r * cols; }

    std::size_t size() const { return values.size(); }

    void fill(double v) { std::fill(values.begin(), values.end(), v); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// y += M x
void matvec_acc(const Matrix& m, std::span<const double> x, std::span<double> y);
// y += M^T x
void matvec_transpose_acc(const Matrix& m, std::span<const double> x, std::span<double> y);
// M += a b^T  (outer product accumulate)
void outer_acc(Matrix& m, std::span<const double> a, std::span<const double> b);

bool all_finite(std::span<const double> v);
void require_finite(std::span<const double> v, const std::string& what);

// Named view of one trainable tensor; vectors are exposed as n x 1.
struct TensorRef {
    std::string name;
    double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const { return rows * cols; }
    std::span<double> span() const { return {data, rows * cols}; }
};

}  // namespace turntaking
