#include "matclip/encoder.hpp"

#include <algorithm>
#include <limits>

#include "matclip/loss.hpp"
#include "matclip/rng.hpp"

namespace matclip {

using detail::BlockCache;
using detail::MaterialCache;
using detail::PartCache;

template <typename T>
EncoderParamsT<T> make_params(const ModelConfig& cfg) {
    cfg.validate();
    EncoderParamsT<T> p;
    p.cfg = cfg;
    const int dm = cfg.d_model;
    p.w_in = Mat<T>(dm, cfg.d_in);
    p.b_in.assign(static_cast<std::size_t>(dm), T(0));
    p.cls.assign(static_cast<std::size_t>(dm), T(0));
    p.pos = Mat<T>(cfg.n_views + 1, dm);
    p.blocks.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& b : p.blocks) {
        b.ln1_gamma.assign(static_cast<std::size_t>(dm), T(0));
        b.ln1_beta.assign(static_cast<std::size_t>(dm), T(0));
        b.wq = Mat<T>(dm, dm);
        b.wk = Mat<T>(dm, dm);
        b.wv = Mat<T>(dm, dm);
        b.wo = Mat<T>(dm, dm);
        b.bq.assign(static_cast<std::size_t>(dm), T(0));
        b.bk.assign(static_cast<std::size_t>(dm), T(0));
        b.bv.assign(static_cast<std::size_t>(dm), T(0));
        b.bo.assign(static_cast<std::size_t>(dm), T(0));
        b.ln2_gamma.assign(static_cast<std::size_t>(dm), T(0));
        b.ln2_beta.assign(static_cast<std::size_t>(dm), T(0));
        b.w_ff1 = Mat<T>(cfg.d_ff, dm);
        b.b_ff1.assign(static_cast<std::size_t>(cfg.d_ff), T(0));
        b.w_ff2 = Mat<T>(dm, cfg.d_ff);
        b.b_ff2.assign(static_cast<std::size_t>(dm), T(0));
    }
    p.w_out = Mat<T>(cfg.d_emb, dm);
    p.b_out.assign(static_cast<std::size_t>(cfg.d_emb), T(0));
    p.part_w1 = Mat<T>(dm, cfg.d_in);
    p.part_b1.assign(static_cast<std::size_t>(dm), T(0));
    p.part_w2 = Mat<T>(cfg.d_emb, dm);
    p.part_b2.assign(static_cast<std::size_t>(cfg.d_emb), T(0));
    p.logit_scale = T(0);
    return p;
}

namespace {

void fill_uniform(Rng& rng, float* data, std::size_t n, double bound) {
    for (std::size_t i = 0; i < n; ++i)
        data[i] = static_cast<float>(rng.uniform(-bound, bound));
}

void fill_mat(Rng& rng, Mat<float>& m, int fan_in) {
    fill_uniform(rng, m.data.data(), m.data.size(), 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

void fill_vec(Rng& rng, std::vector<float>& v, int fan_in) {
    fill_uniform(rng, v.data(), v.size(), 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

}  // namespace

EncoderParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    EncoderParams p = make_params<float>(cfg);
    Rng rng(seed);
    const int dm = cfg.d_model;

    fill_mat(rng, p.w_in, cfg.d_in);
    fill_vec(rng, p.b_in, cfg.d_in);
    fill_vec(rng, p.cls, dm);
    fill_mat(rng, p.pos, dm);
    for (auto& b : p.blocks) {
        std::fill(b.ln1_gamma.begin(), b.ln1_gamma.end(), 1.0f);
        std::fill(b.ln1_beta.begin(), b.ln1_beta.end(), 0.0f);
        fill_mat(rng, b.wq, dm);
        fill_vec(rng, b.bq, dm);
        fill_mat(rng, b.wk, dm);
        fill_vec(rng, b.bk, dm);
        fill_mat(rng, b.wv, dm);
        fill_vec(rng, b.bv, dm);
        fill_mat(rng, b.wo, dm);
        fill_vec(rng, b.bo, dm);
        std::fill(b.ln2_gamma.begin(), b.ln2_gamma.end(), 1.0f);
        std::fill(b.ln2_beta.begin(), b.ln2_beta.end(), 0.0f);
        fill_mat(rng, b.w_ff1, dm);
        fill_vec(rng, b.b_ff1, dm);
        fill_mat(rng, b.w_ff2, cfg.d_ff);
        fill_vec(rng, b.b_ff2, cfg.d_ff);
    }
    fill_mat(rng, p.w_out, dm);
    fill_vec(rng, p.b_out, dm);
    fill_mat(rng, p.part_w1, cfg.d_in);
    fill_vec(rng, p.part_b1, cfg.d_in);
    fill_mat(rng, p.part_w2, dm);
    fill_vec(rng, p.part_b2, dm);

    p.logit_scale = static_cast<float>(std::log(1.0 / 0.07));
    return p;
}

template <typename T>
void material_forward_cached(const EncoderParamsT<T>& p, const Mat<float>& views,
                             MaterialCache<T>& c) {
    const ModelConfig& cfg = p.cfg;
    if (views.cols != cfg.d_in)
        throw DimensionMismatch("view feature dimension does not match encoder d_in");
    if (views.rows != cfg.n_views)
        throw DimensionMismatch("view count does not match encoder n_views");

    const int S = cfg.n_views + 1;
    const int dm = cfg.d_model;
    const int dh = dm / cfg.n_heads;
    const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));

    c.views_proj = Mat<T>(S, dm);
    for (int i = 0; i < dm; ++i)
        c.views_proj(0, i) = p.cls[static_cast<std::size_t>(i)] + p.pos(0, i);
    for (int v = 0; v < views.rows; ++v) {
        T* row = c.views_proj.row(v + 1);
        linear(p.w_in, p.b_in, views.row(v), row);
        for (int i = 0; i < dm; ++i) row[i] += p.pos(v + 1, i);
    }

    c.blocks.resize(p.blocks.size());
    Mat<T> x = c.views_proj;
    for (std::size_t l = 0; l < p.blocks.size(); ++l) {
        const auto& bp = p.blocks[l];
        BlockCache<T>& bc = c.blocks[l];
        bc.x_in = x;

        bc.xhat1 = Mat<T>(S, dm);
        bc.a = Mat<T>(S, dm);
        bc.inv_std1.resize(static_cast<std::size_t>(S));
        detail::layer_norm(bc.x_in, bp.ln1_gamma, bp.ln1_beta, bc.xhat1, bc.inv_std1, bc.a);

        bc.q = Mat<T>(S, dm);
        bc.k = Mat<T>(S, dm);
        bc.v = Mat<T>(S, dm);
        detail::linear_rows(bc.a, bp.wq, bp.bq, bc.q);
        detail::linear_rows(bc.a, bp.wk, bp.bk, bc.k);
        detail::linear_rows(bc.a, bp.wv, bp.bv, bc.v);

        bc.attn.assign(static_cast<std::size_t>(cfg.n_heads), Mat<T>(S, S));
        bc.o = Mat<T>(S, dm);
        for (int h = 0; h < cfg.n_heads; ++h) {
            Mat<T>& attn = bc.attn[static_cast<std::size_t>(h)];
            const int off = h * dh;
            for (int i = 0; i < S; ++i) {
                T* scores = attn.row(i);
                T row_max = -std::numeric_limits<T>::infinity();
                for (int j = 0; j < S; ++j) {
                    scores[j] = dot(bc.q.row(i) + off, bc.k.row(j) + off, dh) * inv_sqrt_dh;
                    row_max = std::max(row_max, scores[j]);
                }
                T denom = 0;
                for (int j = 0; j < S; ++j) {
                    scores[j] = std::exp(scores[j] - row_max);
                    denom += scores[j];
                }
                for (int j = 0; j < S; ++j) scores[j] /= denom;
                T* out = bc.o.row(i) + off;
                std::fill(out, out + dh, T(0));
                for (int j = 0; j < S; ++j)
                    axpy(scores[j], bc.v.row(j) + off, out, dh);
            }
        }

        bc.x_mid = Mat<T>(S, dm);
        detail::linear_rows(bc.o, bp.wo, bp.bo, bc.x_mid);
        for (std::size_t i = 0; i < bc.x_mid.data.size(); ++i)
            bc.x_mid.data[i] += bc.x_in.data[i];

        bc.xhat2 = Mat<T>(S, dm);
        bc.b2 = Mat<T>(S, dm);
        bc.inv_std2.resize(static_cast<std::size_t>(S));
        detail::layer_norm(bc.x_mid, bp.ln2_gamma, bp.ln2_beta, bc.xhat2, bc.inv_std2, bc.b2);

        bc.h1 = Mat<T>(S, cfg.d_ff);
        detail::linear_rows(bc.b2, bp.w_ff1, bp.b_ff1, bc.h1);
        bc.g = Mat<T>(S, cfg.d_ff);
        for (std::size_t i = 0; i < bc.h1.data.size(); ++i)
            bc.g.data[i] = detail::gelu(bc.h1.data[i]);

        x = Mat<T>(S, dm);
        detail::linear_rows(bc.g, bp.w_ff2, bp.b_ff2, x);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            x.data[i] += bc.x_mid.data[i];
    }

    c.cls_out.assign(x.row(0), x.row(0) + dm);
    c.raw.resize(static_cast<std::size_t>(cfg.d_emb));
    linear(p.w_out, p.b_out, c.cls_out.data(), c.raw.data());
    detail::l2norm_vec(c.raw, c.emb, c.raw_norm);
}

template <typename T>
void material_backward(const EncoderParamsT<T>& p, const Mat<float>& views,
                       const MaterialCache<T>& c, const T* d_emb,
                       EncoderParamsT<T>& grads) {
    const ModelConfig& cfg = p.cfg;
    const int S = cfg.n_views + 1;
    const int dm = cfg.d_model;
    const int dh = dm / cfg.n_heads;
    const T inv_sqrt_dh = T(1) / std::sqrt(T(dh));

    std::vector<T> d_raw;
    detail::l2norm_backward(c.emb, c.raw_norm, d_emb, d_raw);

    // output head
    std::vector<T> d_cls_out(static_cast<std::size_t>(dm), T(0));
    for (int o = 0; o < cfg.d_emb; ++o) {
        const T g = d_raw[static_cast<std::size_t>(o)];
        axpy(g, c.cls_out.data(), grads.w_out.row(o), dm);
        grads.b_out[static_cast<std::size_t>(o)] += g;
        axpy(g, p.w_out.row(o), d_cls_out.data(), dm);
    }

    Mat<T> d_x(S, dm);
    for (int i = 0; i < dm; ++i) d_x(0, i) = d_cls_out[static_cast<std::size_t>(i)];

    Mat<T> d_b2(S, dm), d_h1(S, cfg.d_ff), d_g(S, cfg.d_ff);
    Mat<T> d_a(S, dm), d_q(S, dm), d_k(S, dm), d_v(S, dm), d_o(S, dm);
    Mat<T> d_tmp(S, dm);

    for (std::size_t li = p.blocks.size(); li-- > 0;) {
        const auto& bp = p.blocks[li];
        const BlockCache<T>& bc = c.blocks[li];
        auto& gb = grads.blocks[li];

        // x3 = x_mid + W2 gelu(W1 LN2(x_mid) + b1) + b2
        detail::linear_rows_backward(d_x, bc.g, bp.w_ff2, gb.w_ff2, gb.b_ff2, d_g);
        for (std::size_t i = 0; i < d_g.data.size(); ++i)
            d_h1.data[i] = d_g.data[i] * detail::gelu_grad(bc.h1.data[i]);
        detail::linear_rows_backward(d_h1, bc.b2, bp.w_ff1, gb.w_ff1, gb.b_ff1, d_b2);
        detail::layer_norm_backward(d_b2, bc.xhat2, bc.inv_std2, bp.ln2_gamma,
                                    gb.ln2_gamma, gb.ln2_beta, d_tmp);
        Mat<T> d_x_mid = d_x;  // residual branch
        for (std::size_t i = 0; i < d_x_mid.data.size(); ++i)
            d_x_mid.data[i] += d_tmp.data[i];

        // x_mid = x_in + Wo concat_heads(attn) + bo
        detail::linear_rows_backward(d_x_mid, bc.o, bp.wo, gb.wo, gb.bo, d_o);
        d_q.zero();
        d_k.zero();
        d_v.zero();
        std::vector<T> d_p(static_cast<std::size_t>(S));
        for (int h = 0; h < cfg.n_heads; ++h) {
            const Mat<T>& attn = bc.attn[static_cast<std::size_t>(h)];
            const int off = h * dh;
            for (int i = 0; i < S; ++i) {
                const T* p_row = attn.row(i);
                const T* d_oh = d_o.row(i) + off;
                // dV += P^T dO, dP = dO V^T
                T dp_dot_p = 0;
                for (int j = 0; j < S; ++j) {
                    d_p[static_cast<std::size_t>(j)] = dot(d_oh, bc.v.row(j) + off, dh);
                    axpy(p_row[j], d_oh, d_v.row(j) + off, dh);
                    dp_dot_p += d_p[static_cast<std::size_t>(j)] * p_row[j];
                }
                // softmax backward then score scaling
                for (int j = 0; j < S; ++j) {
                    const T ds = p_row[j] * (d_p[static_cast<std::size_t>(j)] - dp_dot_p) * inv_sqrt_dh;
                    axpy(ds, bc.k.row(j) + off, d_q.row(i) + off, dh);
                    axpy(ds, bc.q.row(i) + off, d_k.row(j) + off, dh);
                }
            }
        }
        detail::linear_rows_backward(d_q, bc.a, bp.wq, gb.wq, gb.bq, d_a);
        detail::linear_rows_backward(d_k, bc.a, bp.wk, gb.wk, gb.bk, d_tmp);
        for (std::size_t i = 0; i < d_a.data.size(); ++i) d_a.data[i] += d_tmp.data[i];
        detail::linear_rows_backward(d_v, bc.a, bp.wv, gb.wv, gb.bv, d_tmp);
        for (std::size_t i = 0; i < d_a.data.size(); ++i) d_a.data[i] += d_tmp.data[i];

        detail::layer_norm_backward(d_a, bc.xhat1, bc.inv_std1, bp.ln1_gamma,
                                    gb.ln1_gamma, gb.ln1_beta, d_tmp);
        d_x = d_x_mid;
        for (std::size_t i = 0; i < d_x.data.size(); ++i) d_x.data[i] += d_tmp.data[i];
    }

    // positions, CLS, input projection
    for (int s = 0; s < S; ++s) axpy(T(1), d_x.row(s), grads.pos.row(s), dm);
    axpy(T(1), d_x.row(0), grads.cls.data(), dm);
    for (int v = 0; v < views.rows; ++v) {
        const T* d_row = d_x.row(v + 1);
        const float* in = views.row(v);
        for (int o = 0; o < dm; ++o) {
            const T g = d_row[o];
            if (g == T(0)) continue;
            T* w_row = grads.w_in.row(o);
            for (int j = 0; j < cfg.d_in; ++j) w_row[j] += g * static_cast<T>(in[j]);
            grads.b_in[static_cast<std::size_t>(o)] += g;
        }
    }
}

template <typename T>
void part_forward_cached(const EncoderParamsT<T>& p, const float* desc, int n,
                         PartCache<T>& c) {
    const ModelConfig& cfg = p.cfg;
    if (n != cfg.d_in)
        throw DimensionMismatch("part descriptor length does not match encoder d_in");
    c.h1.resize(static_cast<std::size_t>(cfg.d_model));
    linear(p.part_w1, p.part_b1, desc, c.h1.data());
    c.g.resize(c.h1.size());
    for (std::size_t i = 0; i < c.h1.size(); ++i) c.g[i] = detail::gelu(c.h1[i]);
    c.raw.resize(static_cast<std::size_t>(cfg.d_emb));
    linear(p.part_w2, p.part_b2, c.g.data(), c.raw.data());
    detail::l2norm_vec(c.raw, c.emb, c.raw_norm);
}

template <typename T>
void part_backward(const EncoderParamsT<T>& p, const float* desc,
                   const PartCache<T>& c, const T* d_emb,
                   EncoderParamsT<T>& grads) {
    const ModelConfig& cfg = p.cfg;
    std::vector<T> d_raw;
    detail::l2norm_backward(c.emb, c.raw_norm, d_emb, d_raw);

    std::vector<T> d_g(static_cast<std::size_t>(cfg.d_model), T(0));
    for (int o = 0; o < cfg.d_emb; ++o) {
        const T g = d_raw[static_cast<std::size_t>(o)];
        axpy(g, c.g.data(), grads.part_w2.row(o), cfg.d_model);
        grads.part_b2[static_cast<std::size_t>(o)] += g;
        axpy(g, p.part_w2.row(o), d_g.data(), cfg.d_model);
    }
    for (int o = 0; o < cfg.d_model; ++o) {
        const std::size_t uo = static_cast<std::size_t>(o);
        const T dh1 = d_g[uo] * detail::gelu_grad(c.h1[uo]);
        T* w_row = grads.part_w1.row(o);
        for (int j = 0; j < cfg.d_in; ++j) w_row[j] += dh1 * static_cast<T>(desc[j]);
        grads.part_b1[uo] += dh1;
    }
}

std::vector<float> material_forward(const EncoderParams& p, const MaterialViewSet& viewset) {
    detail::MaterialCache<float> cache;
    material_forward_cached(p, viewset.views, cache);
    return cache.emb;
}

std::vector<float> part_forward(const EncoderParams& p, const std::vector<float>& descriptor) {
    detail::PartCache<float> cache;
    part_forward_cached(p, descriptor.data(), static_cast<int>(descriptor.size()), cache);
    return cache.emb;
}

template <typename T>
BatchResult<T> batch_forward_backward(const EncoderParamsT<T>& p,
                                      const std::vector<const MaterialViewSet*>& materials,
                                      const std::vector<const PartSample*>& parts) {
    if (materials.size() != parts.size() || materials.empty())
        throw DimensionMismatch("material and part batches must have equal nonzero size");
    const int batch = static_cast<int>(materials.size());
    const int de = p.cfg.d_emb;

    std::vector<MaterialCache<T>> mat_caches(static_cast<std::size_t>(batch));
    std::vector<PartCache<T>> part_caches(static_cast<std::size_t>(batch));
    Mat<T> mat_emb(batch, de), part_emb(batch, de);
    for (int i = 0; i < batch; ++i) {
        material_forward_cached(p, materials[static_cast<std::size_t>(i)]->views,
                                mat_caches[static_cast<std::size_t>(i)]);
        const auto& desc = parts[static_cast<std::size_t>(i)]->descriptor;
        part_forward_cached(p, desc.data(), static_cast<int>(desc.size()),
                            part_caches[static_cast<std::size_t>(i)]);
        std::copy(mat_caches[static_cast<std::size_t>(i)].emb.begin(),
                  mat_caches[static_cast<std::size_t>(i)].emb.end(), mat_emb.row(i));
        std::copy(part_caches[static_cast<std::size_t>(i)].emb.begin(),
                  part_caches[static_cast<std::size_t>(i)].emb.end(), part_emb.row(i));
    }

    InfoNceGrads<T> lg = info_nce_grads(mat_emb, part_emb, p.logit_scale);

    BatchResult<T> result;
    result.loss = lg.loss;
    result.grads = make_params<T>(p.cfg);
    for (int i = 0; i < batch; ++i) {
        material_backward(p, materials[static_cast<std::size_t>(i)]->views,
                          mat_caches[static_cast<std::size_t>(i)], lg.d_mat.row(i), result.grads);
        part_backward(p, parts[static_cast<std::size_t>(i)]->descriptor.data(),
                      part_caches[static_cast<std::size_t>(i)], lg.d_part.row(i), result.grads);
    }
    result.grads.logit_scale = lg.d_t;
    return result;
}

template <typename T>
T batch_loss(const EncoderParamsT<T>& p,
             const std::vector<const MaterialViewSet*>& materials,
             const std::vector<const PartSample*>& parts) {
    if (materials.size() != parts.size() || materials.empty())
        throw DimensionMismatch("material and part batches must have equal nonzero size");
    const int batch = static_cast<int>(materials.size());
    Mat<T> mat_emb(batch, p.cfg.d_emb), part_emb(batch, p.cfg.d_emb);
    MaterialCache<T> mc;
    PartCache<T> pc;
    for (int i = 0; i < batch; ++i) {
        material_forward_cached(p, materials[static_cast<std::size_t>(i)]->views, mc);
        const auto& desc = parts[static_cast<std::size_t>(i)]->descriptor;
        part_forward_cached(p, desc.data(), static_cast<int>(desc.size()), pc);
        std::copy(mc.emb.begin(), mc.emb.end(), mat_emb.row(i));
        std::copy(pc.emb.begin(), pc.emb.end(), part_emb.row(i));
    }
    return info_nce(mat_emb, part_emb, p.logit_scale);
}

template struct EncoderParamsT<float>;
template struct EncoderParamsT<double>;

template EncoderParamsT<float> make_params<float>(const ModelConfig&);
template EncoderParamsT<double> make_params<double>(const ModelConfig&);

template void material_forward_cached<float>(const EncoderParamsT<float>&, const Mat<float>&,
                                              MaterialCache<float>&);
template void material_forward_cached<double>(const EncoderParamsT<double>&, const Mat<float>&,
                                               MaterialCache<double>&);
template void material_backward<float>(const EncoderParamsT<float>&, const Mat<float>&,
                                        const MaterialCache<float>&, const float*,
                                        EncoderParamsT<float>&);
template void material_backward<double>(const EncoderParamsT<double>&, const Mat<float>&,
                                         const MaterialCache<double>&, const double*,
                                         EncoderParamsT<double>&);
template void part_forward_cached<float>(const EncoderParamsT<float>&, const float*, int,
                                          PartCache<float>&);
template void part_forward_cached<double>(const EncoderParamsT<double>&, const float*, int,
                                           PartCache<double>&);
template void part_backward<float>(const EncoderParamsT<float>&, const float*,
                                    const PartCache<float>&, const float*,
                                    EncoderParamsT<float>&);
template void part_backward<double>(const EncoderParamsT<double>&, const float*,
                                     const PartCache<double>&, const double*,
                                     EncoderParamsT<double>&);
template BatchResult<float> batch_forward_backward<float>(
    const EncoderParamsT<float>&, const std::vector<const MaterialViewSet*>&,
    const std::vector<const PartSample*>&);
template BatchResult<double> batch_forward_backward<double>(
    const EncoderParamsT<double>&, const std::vector<const MaterialViewSet*>&,
    const std::vector<const PartSample*>&);
template float batch_loss<float>(const EncoderParamsT<float>&,
                                 const std::vector<const MaterialViewSet*>&,
                                 const std::vector<const PartSample*>&);
template double batch_loss<double>(const EncoderParamsT<double>&,
                                   const std::vector<const MaterialViewSet*>&,
                                   const std::vector<const PartSample*>&);

}  // namespace matclip
