#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "matclip/dataset.hpp"
#include "matclip/errors.hpp"
#include "matclip/tensor.hpp"

namespace matclip {

struct ModelConfig {
    int d_in = 32;
    int d_model = 64;
    int d_ff = 256;
    int n_heads = 4;
    int n_layers = 2;
    int d_emb = 32;
    int n_views = 42;

    void validate() const {
        if (d_in < 1 || d_model < 1 || d_ff < 1 || n_heads < 1 || n_layers < 1 ||
            d_emb < 1 || n_views < 1)
            throw InvalidConfig("model dimensions must be >= 1");
        if (d_model % n_heads != 0)
            throw InvalidConfig("d_model must be divisible by n_heads");
    }
};

inline constexpr float kMaxLogitScale = 100.0f;  // clamp on e^t
inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct BlockParamsT {
    std::vector<T> ln1_gamma, ln1_beta;
    Mat<T> wq, wk, wv, wo;
    std::vector<T> bq, bk, bv, bo;
    std::vector<T> ln2_gamma, ln2_beta;
    Mat<T> w_ff1;
    std::vector<T> b_ff1;
    Mat<T> w_ff2;
    std::vector<T> b_ff2;
};

// Every learnable weight of both encoders plus the logit scale t
// (effective temperature e^t).
template <typename T>
struct EncoderParamsT {
    ModelConfig cfg;

    // material branch: linear projection -> CLS + positions -> transformer -> head
    Mat<T> w_in;
    std::vector<T> b_in;
    std::vector<T> cls;
    Mat<T> pos;  // (n_views + 1) x d_model
    std::vector<BlockParamsT<T>> blocks;
    Mat<T> w_out;
    std::vector<T> b_out;

    // part branch: 2-layer MLP
    Mat<T> part_w1;
    std::vector<T> part_b1;
    Mat<T> part_w2;
    std::vector<T> part_b2;

    T logit_scale = T(0);
};

using EncoderParams = EncoderParamsT<float>;

namespace detail {

inline constexpr double kGeluK = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluC = 0.044715;

template <typename T>
inline T gelu(T x) {
    const T u = T(kGeluK) * (x + T(kGeluC) * x * x * x);
    return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
inline T gelu_grad(T x) {
    const T u = T(kGeluK) * (x + T(kGeluC) * x * x * x);
    const T th = std::tanh(u);
    const T du = T(kGeluK) * (T(1) + T(3) * T(kGeluC) * x * x);
    return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
}

// Row-wise layer norm. Caches xhat and 1/sqrt(var+eps) for the backward pass.
template <typename T>
void layer_norm(const Mat<T>& x, const std::vector<T>& gamma, const std::vector<T>& beta,
                Mat<T>& xhat, std::vector<T>& inv_std, Mat<T>& out) {
    const int n = x.cols;
    for (int r = 0; r < x.rows; ++r) {
        const T* xr = x.row(r);
        T mean = 0;
        for (int i = 0; i < n; ++i) mean += xr[i];
        mean /= T(n);
        T var = 0;
        for (int i = 0; i < n; ++i) {
            const T d = xr[i] - mean;
            var += d * d;
        }
        var /= T(n);
        const T istd = T(1) / std::sqrt(var + T(kLayerNormEps));
        inv_std[static_cast<std::size_t>(r)] = istd;
        T* hr = xhat.row(r);
        T* yr = out.row(r);
        for (int i = 0; i < n; ++i) {
            hr[i] = (xr[i] - mean) * istd;
            yr[i] = gamma[static_cast<std::size_t>(i)] * hr[i] + beta[static_cast<std::size_t>(i)];
        }
    }
}

template <typename T>
void layer_norm_backward(const Mat<T>& d_out, const Mat<T>& xhat, const std::vector<T>& inv_std,
                         const std::vector<T>& gamma, std::vector<T>& d_gamma,
                         std::vector<T>& d_beta, Mat<T>& d_x) {
    const int n = d_out.cols;
    for (int r = 0; r < d_out.rows; ++r) {
        const T* dy = d_out.row(r);
        const T* hr = xhat.row(r);
        T* dx = d_x.row(r);
        T mean_dxhat = 0, mean_dxhat_xhat = 0;
        for (int i = 0; i < n; ++i) {
            const std::size_t ui = static_cast<std::size_t>(i);
            d_gamma[ui] += dy[i] * hr[i];
            d_beta[ui] += dy[i];
            const T dxhat = dy[i] * gamma[ui];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * hr[i];
        }
        mean_dxhat /= T(n);
        mean_dxhat_xhat /= T(n);
        const T istd = inv_std[static_cast<std::size_t>(r)];
        for (int i = 0; i < n; ++i) {
            const T dxhat = dy[i] * gamma[static_cast<std::size_t>(i)];
            dx[i] = istd * (dxhat - mean_dxhat - hr[i] * mean_dxhat_xhat);
        }
    }
}

// Y(S x out) = X(S x in) * W^T + b, W stored (out x in).
template <typename T>
void linear_rows(const Mat<T>& x, const Mat<T>& w, const std::vector<T>& b, Mat<T>& y) {
    for (int r = 0; r < x.rows; ++r) {
        const T* xr = x.row(r);
        T* yr = y.row(r);
        for (int o = 0; o < w.rows; ++o) yr[o] = dot(w.row(o), xr, w.cols) + b[static_cast<std::size_t>(o)];
    }
}

// Gradients of linear_rows. d_x may alias nothing; accumulates into d_w/d_b,
// overwrites d_x.
template <typename T>
void linear_rows_backward(const Mat<T>& d_y, const Mat<T>& x, const Mat<T>& w,
                          Mat<T>& d_w, std::vector<T>& d_b, Mat<T>& d_x) {
    d_x.zero();
    for (int r = 0; r < d_y.rows; ++r) {
        const T* dyr = d_y.row(r);
        const T* xr = x.row(r);
        T* dxr = d_x.row(r);
        for (int o = 0; o < w.rows; ++o) {
            const T g = dyr[o];
            if (g == T(0)) continue;
            axpy(g, xr, d_w.row(o), w.cols);
            d_b[static_cast<std::size_t>(o)] += g;
            axpy(g, w.row(o), dxr, w.cols);
        }
    }
}

template <typename T>
struct BlockCache {
    Mat<T> x_in;            // S x d_model (block input)
    Mat<T> xhat1, a;        // LN1 cache + output
    std::vector<T> inv_std1;
    Mat<T> q, k, v;         // S x d_model
    std::vector<Mat<T>> attn;  // per head: S x S softmax rows
    Mat<T> o;               // S x d_model concat of head outputs
    Mat<T> x_mid;           // after attention residual
    Mat<T> xhat2, b2;       // LN2 cache + output
    std::vector<T> inv_std2;
    Mat<T> h1;              // S x d_ff pre-activation
    Mat<T> g;               // gelu(h1)
};

template <typename T>
struct MaterialCache {
    Mat<T> views_proj;  // S x d_model (pos already added; row 0 is CLS)
    std::vector<BlockCache<T>> blocks;
    std::vector<T> cls_out;  // d_model
    std::vector<T> raw;      // d_emb pre-normalization
    T raw_norm = T(0);
    std::vector<T> emb;      // unit norm
};

template <typename T>
struct PartCache {
    std::vector<T> h1;   // d_model pre-activation
    std::vector<T> g;    // gelu(h1)
    std::vector<T> raw;  // d_emb
    T raw_norm = T(0);
    std::vector<T> emb;
};

template <typename T>
void l2norm_vec(const std::vector<T>& raw, std::vector<T>& emb, T& norm_out) {
    T ss = 0;
    for (T x : raw) {
        if (!std::isfinite(static_cast<double>(x)))
            throw NonFiniteActivation("non-finite value in encoder output");
        ss += x * x;
    }
    const T norm = std::sqrt(ss);
    if (norm <= T(1e-12)) throw ZeroVector("encoder produced a zero embedding");
    emb.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) emb[i] = raw[i] / norm;
    norm_out = norm;
}

// d_raw = (d_emb - emb * <emb, d_emb>) / norm
template <typename T>
void l2norm_backward(const std::vector<T>& emb, T norm, const T* d_emb,
                     std::vector<T>& d_raw) {
    T proj = 0;
    for (std::size_t i = 0; i < emb.size(); ++i) proj += emb[i] * d_emb[i];
    d_raw.resize(emb.size());
    for (std::size_t i = 0; i < emb.size(); ++i)
        d_raw[i] = (d_emb[i] - emb[i] * proj) / norm;
}

}  // namespace detail

EncoderParams init_params(const ModelConfig& cfg, std::uint64_t seed);

template <typename T>
EncoderParamsT<T> make_params(const ModelConfig& cfg);

// Enumerates every tensor in a fixed order shared by init, the optimizer,
// checkpoints, and the gradient checker. f(name, data, count, dims).
template <typename T, typename F>
void for_each_tensor(EncoderParamsT<T>& p, F&& f) {
    auto vec = [&](const std::string& name, std::vector<T>& v) {
        f(name, v.data(), v.size(), std::vector<std::uint32_t>{static_cast<std::uint32_t>(v.size())});
    };
    auto mat = [&](const std::string& name, Mat<T>& m) {
        f(name, m.data.data(), m.data.size(),
          std::vector<std::uint32_t>{static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)});
    };
    mat("material.w_in", p.w_in);
    vec("material.b_in", p.b_in);
    vec("material.cls", p.cls);
    mat("material.pos", p.pos);
    for (std::size_t l = 0; l < p.blocks.size(); ++l) {
        auto& b = p.blocks[l];
        const std::string prefix = "material.block" + std::to_string(l) + ".";
        vec(prefix + "ln1_gamma", b.ln1_gamma);
        vec(prefix + "ln1_beta", b.ln1_beta);
        mat(prefix + "wq", b.wq);
        vec(prefix + "bq", b.bq);
        mat(prefix + "wk", b.wk);
        vec(prefix + "bk", b.bk);
        mat(prefix + "wv", b.wv);
        vec(prefix + "bv", b.bv);
        mat(prefix + "wo", b.wo);
        vec(prefix + "bo", b.bo);
        vec(prefix + "ln2_gamma", b.ln2_gamma);
        vec(prefix + "ln2_beta", b.ln2_beta);
        mat(prefix + "w_ff1", b.w_ff1);
        vec(prefix + "b_ff1", b.b_ff1);
        mat(prefix + "w_ff2", b.w_ff2);
        vec(prefix + "b_ff2", b.b_ff2);
    }
    mat("material.w_out", p.w_out);
    vec("material.b_out", p.b_out);
    mat("part.w1", p.part_w1);
    vec("part.b1", p.part_b1);
    mat("part.w2", p.part_w2);
    vec("part.b2", p.part_b2);
    f(std::string("logit_scale"), &p.logit_scale, std::size_t(1), std::vector<std::uint32_t>{1});
}

template <typename T, typename F>
void for_each_tensor(const EncoderParamsT<T>& p, F&& f) {
    for_each_tensor(const_cast<EncoderParamsT<T>&>(p),
                    [&](const std::string& name, T* data, std::size_t n, std::vector<std::uint32_t> dims) {
                        f(name, static_cast<const T*>(data), n, std::move(dims));
                    });
}

template <typename T>
std::size_t param_count(const EncoderParamsT<T>& p) {
    std::size_t total = 0;
    for_each_tensor(p, [&](const std::string&, const T*, std::size_t n, std::vector<std::uint32_t>) {
        total += n;
    });
    return total;
}

// --- forward / backward -----------------------------------------------------

template <typename T>
void material_forward_cached(const EncoderParamsT<T>& p, const Mat<float>& views,
                             detail::MaterialCache<T>& c);

template <typename T>
void material_backward(const EncoderParamsT<T>& p, const Mat<float>& views,
                       const detail::MaterialCache<T>& c, const T* d_emb,
                       EncoderParamsT<T>& grads);

template <typename T>
void part_forward_cached(const EncoderParamsT<T>& p, const float* desc, int n,
                         detail::PartCache<T>& c);

template <typename T>
void part_backward(const EncoderParamsT<T>& p, const float* desc,
                   const detail::PartCache<T>& c, const T* d_emb,
                   EncoderParamsT<T>& grads);

// Unit-norm embedding of a full view set.
std::vector<float> material_forward(const EncoderParams& p, const MaterialViewSet& viewset);

// Unit-norm embedding of a part descriptor.
std::vector<float> part_forward(const EncoderParams& p, const std::vector<float>& descriptor);

template <typename T>
struct BatchResult {
    T loss = T(0);
    EncoderParamsT<T> grads;
};

// Contrastive loss over paired (material, part) batches with exact analytic
// gradients for every parameter including logit_scale.
template <typename T>
BatchResult<T> batch_forward_backward(const EncoderParamsT<T>& p,
                                      const std::vector<const MaterialViewSet*>& materials,
                                      const std::vector<const PartSample*>& parts);

// Loss only; used by the finite-difference oracle.
template <typename T>
T batch_loss(const EncoderParamsT<T>& p,
             const std::vector<const MaterialViewSet*>& materials,
             const std::vector<const PartSample*>& parts);

// Copies params into a different scalar type (f64 for gradient checks).
// Both enumerations follow the same fixed tensor order.
template <typename To, typename From>
EncoderParamsT<To> convert_params(const EncoderParamsT<From>& src) {
    EncoderParamsT<To> dst = make_params<To>(src.cfg);
    std::vector<std::pair<const From*, std::size_t>> flat;
    for_each_tensor(src, [&](const std::string&, const From* d, std::size_t n,
                             std::vector<std::uint32_t>) { flat.emplace_back(d, n); });
    std::size_t idx = 0;
    for_each_tensor(dst, [&](const std::string&, To* d, std::size_t n,
                             std::vector<std::uint32_t>) {
        for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<To>(flat[idx].first[i]);
        ++idx;
    });
    return dst;
}

extern template struct EncoderParamsT<float>;
extern template struct EncoderParamsT<double>;

}  // namespace matclip
