#pragma once

#include <cmath>
#include <limits>

#include "matclip/errors.hpp"
#include "matclip/tensor.hpp"

namespace matclip {

// Symmetric InfoNCE over paired unit-norm embedding batches: logits
// L = e^t * mat·part^T, loss = mean of row-wise and column-wise cross-entropy
// against the identity pairing, averaged over both directions.

template <typename T>
struct InfoNceGrads {
    T loss = T(0);
    Mat<T> d_mat, d_part;
    T d_t = T(0);
};

namespace detail {

template <typename T>
void check_pair(const Mat<T>& mat, const Mat<T>& part) {
    if (mat.rows != part.rows || mat.cols != part.cols)
        throw DimensionMismatch("paired embedding batches must share shape");
    if (mat.rows < 1) throw DimensionMismatch("empty embedding batch");
}

// logits, row softmax R, column softmax C; returns loss. Any output matrix
// pointer may be null when only the loss is needed.
template <typename T>
T info_nce_core(const Mat<T>& mat, const Mat<T>& part, T t,
                Mat<T>* logits_out, Mat<T>* row_sm, Mat<T>* col_sm) {
    check_pair(mat, part);
    const int b = mat.rows;
    const T scale = std::exp(t);

    Mat<T> logits(b, b);
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j)
            logits(i, j) = scale * dot(mat.row(i), part.row(j), mat.cols);

    // log-sum-exp with max subtraction keeps f32 finite up to the e^t clamp
    T loss = T(0);
    for (int i = 0; i < b; ++i) {
        T m = -std::numeric_limits<T>::infinity();
        for (int j = 0; j < b; ++j) m = std::max(m, logits(i, j));
        T denom = T(0);
        for (int j = 0; j < b; ++j) denom += std::exp(logits(i, j) - m);
        loss += m + std::log(denom) - logits(i, i);
        if (row_sm)
            for (int j = 0; j < b; ++j) (*row_sm)(i, j) = std::exp(logits(i, j) - m) / denom;
    }
    for (int j = 0; j < b; ++j) {
        T m = -std::numeric_limits<T>::infinity();
        for (int i = 0; i < b; ++i) m = std::max(m, logits(i, j));
        T denom = T(0);
        for (int i = 0; i < b; ++i) denom += std::exp(logits(i, j) - m);
        loss += m + std::log(denom) - logits(j, j);
        if (col_sm)
            for (int i = 0; i < b; ++i) (*col_sm)(i, j) = std::exp(logits(i, j) - m) / denom;
    }
    if (logits_out) *logits_out = std::move(logits);
    return loss / T(2 * b);
}

}  // namespace detail

template <typename T>
T info_nce(const Mat<T>& mat, const Mat<T>& part, T t) {
    return detail::info_nce_core<T>(mat, part, t, nullptr, nullptr, nullptr);
}

template <typename T>
InfoNceGrads<T> info_nce_grads(const Mat<T>& mat, const Mat<T>& part, T t) {
    const int b = mat.rows;
    Mat<T> logits, row_sm(b > 0 ? b : 1, b > 0 ? b : 1), col_sm(b > 0 ? b : 1, b > 0 ? b : 1);
    InfoNceGrads<T> out;
    out.loss = detail::info_nce_core(mat, part, t, &logits, &row_sm, &col_sm);

    // dLoss/dLogits = (row_softmax + col_softmax - 2I) / (2B)
    Mat<T> d_logits(b, b);
    const T inv = T(1) / T(2 * b);
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j)
            d_logits(i, j) = (row_sm(i, j) + col_sm(i, j) - (i == j ? T(2) : T(0))) * inv;

    const T scale = std::exp(t);
    out.d_mat = Mat<T>(b, mat.cols);
    out.d_part = Mat<T>(b, mat.cols);
    out.d_t = T(0);
    for (int i = 0; i < b; ++i) {
        for (int j = 0; j < b; ++j) {
            const T g = d_logits(i, j);
            out.d_t += g * logits(i, j);  // d(e^t * s)/dt = logit itself
            if (g == T(0)) continue;
            axpy(g * scale, part.row(j), out.d_mat.row(i), mat.cols);
            axpy(g * scale, mat.row(i), out.d_part.row(j), mat.cols);
        }
    }
    return out;
}

}  // namespace matclip
