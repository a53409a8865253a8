#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace gradapt {

using Vec = std::vector<double>;

/// Dense row-major matrix. Deliberately minimal; everything in this project
/// is small enough that cache games and BLAS do not pay for themselves.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
};

inline double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double squared_distance(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double distance(const Vec& a, const Vec& b) { return std::sqrt(squared_distance(a, b)); }

/// y = M x
inline void matvec(const Matrix& m, const Vec& x, Vec& y) {
    assert(static_cast<int>(x.size()) == m.cols);
    y.assign(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        const double* row = &m.data[static_cast<std::size_t>(i) * m.cols];
        for (int j = 0; j < m.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
}

/// y = M^T x
inline void matvec_transposed(const Matrix& m, const Vec& x, Vec& y) {
    assert(static_cast<int>(x.size()) == m.rows);
    y.assign(m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        const double* row = &m.data[static_cast<std::size_t>(i) * m.cols];
        for (int j = 0; j < m.cols; ++j) y[j] += row[j] * x[i];
    }
}

}  // namespace gradapt
