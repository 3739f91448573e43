#pragma once

#include <cstddef>
#include <vector>

#include "probekit/common.hpp"

namespace probekit {

// Dense row-major matrix. Deliberately minimal: the compute kernels in this
// project are plain loops over contiguous rows, nothing fancier is needed.
template <typename T>
struct Mat {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<T> data;

    Mat() = default;
    Mat(size_t r, size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T& at(size_t r, size_t c) { return data[r * cols + c]; }
    const T& at(size_t r, size_t c) const { return data[r * cols + c]; }

    T* row(size_t r) { return data.data() + r * cols; }
    const T* row(size_t r) const { return data.data() + r * cols; }

    bool empty() const { return data.empty(); }

    bool operator==(const Mat& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

// out[cols_b] = v[rows_b] * B[rows_b x cols_b], accumulated in double.
inline void vec_mat_mul(const float* v, const MatF& b, float* out) {
    std::vector<double> acc(b.cols, 0.0);
    for (size_t i = 0; i < b.rows; ++i) {
        const double vi = v[i];
        if (vi == 0.0) continue;
        const float* brow = b.row(i);
        for (size_t j = 0; j < b.cols; ++j) acc[j] += vi * brow[j];
    }
    for (size_t j = 0; j < b.cols; ++j) out[j] = static_cast<float>(acc[j]);
}

inline double dot(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double dot(const float* a, const float* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

}  // namespace probekit
