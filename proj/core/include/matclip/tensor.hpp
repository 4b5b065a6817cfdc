#pragma once

#include <cstddef>
#include <vector>

namespace matclip {

// Dense row-major matrix. Deliberately minimal: the encoders need nothing
// beyond contiguous rows and a handful of dot/axpy kernels.
template <typename T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, T(0)) {}

    T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    const T& operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    T* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
    const T* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

    std::size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), T(0)); }
};

// Four-accumulator dot product. Fixed summation order (deterministic) while
// still letting the compiler keep independent FMA chains in flight.
template <typename T, typename U>
inline T dot(const T* a, const U* b, int n) {
    T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * static_cast<T>(b[i]);
        s1 += a[i + 1] * static_cast<T>(b[i + 1]);
        s2 += a[i + 2] * static_cast<T>(b[i + 2]);
        s3 += a[i + 3] * static_cast<T>(b[i + 3]);
    }
    for (; i < n; ++i) s0 += a[i] * static_cast<T>(b[i]);
    return (s0 + s1) + (s2 + s3);
}

template <typename T>
inline void axpy(T alpha, const T* x, T* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// y = W x + b where W is (out x in) row-major.
template <typename T, typename U>
inline void linear(const Mat<T>& w, const std::vector<T>& b, const U* x, T* y) {
    for (int o = 0; o < w.rows; ++o) y[o] = dot(w.row(o), x, w.cols) + b[o];
}

}  // namespace matclip
