#include "turntaking/matrix.hpp"

#include <cmath>

namespace turntaking {

void matvec_acc(const Matrix& m, std::span<const double> x, std::span<double> y) {
    if (x.size() != m.cols || y.size() != m.rows)
        throw ConfigError("matvec_acc: shape mismatch");
    const double* p = m.values.data();
    for (std::size_t r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) acc += p[c] * x[c];
        y[r] += acc;
        p += m.cols;
    }
}

void matvec_transpose_acc(const Matrix& m, std::span<const double> x, std::span<double> y) {
    if (x.size() != m.rows || y.size() != m.cols)
        throw ConfigError("matvec_transpose_acc: shape mismatch");
    const double* p = m.values.data();
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double xr = x[r];
        if (xr != 0.0) {
            for (std::size_t c = 0; c < m.cols; ++c) y[c] += p[c] * xr;
        }
        p += m.cols;
    }
}

void outer_acc(Matrix& m, std::span<const double> a, std::span<const double> b) {
    if (a.size() != m.rows || b.size() != m.cols)
        throw ConfigError("outer_acc: shape mismatch");
    double* p = m.values.data();
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double ar = a[r];
        if (ar != 0.0) {
            for (std::size_t c = 0; c < m.cols; ++c) p[c] += ar * b[c];
        }
        p += m.cols;
    }
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void require_finite(std::span<const double> v, const std::string& what) {
    if (!all_finite(v)) throw NumericError(what + ": non-finite value");
}

}  // namespace turntaking
